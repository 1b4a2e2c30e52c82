#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace meso {

/// Real-valued step function on the periodic lattice of n (odd) cells.
/// Value j is the value on the cell I_j = [j/n, (j+1)/n).
struct GridFunction {
  int n = 0;
  std::vector<double> values;

  GridFunction() = default;
  GridFunction(int n_, double fill = 0.0) : n(n_), values(static_cast<std::size_t>(n_), fill) {
    check_cell_count(n_);
  }
  GridFunction(int n_, std::vector<double> vals) : n(n_), values(std::move(vals)) {
    check_cell_count(n_);
    if (values.size() != static_cast<std::size_t>(n_))
      throw std::invalid_argument("GridFunction: values length != n");
  }

  static void check_cell_count(int n) {
    if (n <= 0 || n % 2 == 0)
      throw std::invalid_argument("GridFunction: cell count must be odd and positive, got " +
                                  std::to_string(n));
  }

  double& operator[](int j) { return values[static_cast<std::size_t>(j)]; }
  double operator[](int j) const { return values[static_cast<std::size_t>(j)]; }

  // Periodic accessor, j may be any integer.
  double at_periodic(int j) const {
    int k = j % n;
    if (k < 0) k += n;
    return values[static_cast<std::size_t>(k)];
  }
};

/// Coefficients in the trigonometric eigenbasis of the discrete Laplacian:
/// a[m] = <f, phi_m>, b[m] = <f, psi_m>, m = 0 .. (n-1)/2, with b[0] == 0.
struct SpectralCoeffs {
  int n = 0;
  std::vector<double> a;
  std::vector<double> b;

  SpectralCoeffs() = default;
  explicit SpectralCoeffs(int n_) : n(n_) {
    GridFunction::check_cell_count(n_);
    a.assign(static_cast<std::size_t>(mode_count()), 0.0);
    b.assign(static_cast<std::size_t>(mode_count()), 0.0);
  }

  int mode_count() const { return (n + 1) / 2; }
};

/// Exponent of a discrete Sobolev norm. Capped to [-2, 2] so the weights
/// (1 + lambda)^alpha stay representable at large n.
struct SobolevIndex {
  double alpha = 0.0;

  SobolevIndex() = default;
  SobolevIndex(double a) : alpha(a) {  // NOLINT: implicit by design
    if (!std::isfinite(a) || a < -2.0 || a > 2.0)
      throw std::invalid_argument("SobolevIndex: alpha must be finite and in [-2, 2]");
  }
  operator double() const { return alpha; }
};

// Pointwise arithmetic used throughout the error metrics.
inline GridFunction operator-(const GridFunction& f, const GridFunction& g) {
  if (f.n != g.n) throw std::invalid_argument("GridFunction: size mismatch");
  GridFunction out(f.n);
  for (int j = 0; j < f.n; ++j) out[j] = f[j] - g[j];
  return out;
}

inline GridFunction operator+(const GridFunction& f, const GridFunction& g) {
  if (f.n != g.n) throw std::invalid_argument("GridFunction: size mismatch");
  GridFunction out(f.n);
  for (int j = 0; j < f.n; ++j) out[j] = f[j] + g[j];
  return out;
}

inline GridFunction operator*(double c, const GridFunction& f) {
  GridFunction out(f.n);
  for (int j = 0; j < f.n; ++j) out[j] = c * f[j];
  return out;
}

inline double linf_norm(const GridFunction& f) {
  double m = 0.0;
  for (double x : f.values) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace meso
