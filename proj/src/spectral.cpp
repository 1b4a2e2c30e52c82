#include "meso/spectral.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace meso::spectral {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

// Two-term Kahan accumulator; keeps O(n^2) transform sums at ~1 ulp.
struct Kahan {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  double value() const { return s; }
};

}  // namespace

TrigTable::TrigTable(int n_) : n(n_) {
  c.resize(static_cast<std::size_t>(n));
  s.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    double th = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    c[static_cast<std::size_t>(k)] = std::cos(th);
    s[static_cast<std::size_t>(k)] = std::sin(th);
  }
  ch.resize(static_cast<std::size_t>(2 * n));
  sh.resize(static_cast<std::size_t>(2 * n));
  for (int q = 0; q < 2 * n; ++q) {
    double th = kPi * static_cast<double>(q) / static_cast<double>(n);
    ch[static_cast<std::size_t>(q)] = std::cos(th);
    sh[static_cast<std::size_t>(q)] = std::sin(th);
  }
}

const TrigTable& trig_table(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<TrigTable>> cache;
  std::scoped_lock lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<TrigTable>(n)).first;
  return *it->second;
}

SpectralCoeffs analyze(const GridFunction& f) {
  const int n = f.n;
  const TrigTable& tt = trig_table(n);
  SpectralCoeffs out(n);
  const int mc = out.mode_count();
  // Mean mode.
  {
    Kahan acc;
    for (int j = 0; j < n; ++j) acc.add(f[j]);
    out.a[0] = acc.value() / n;
    out.b[0] = 0.0;
  }
  for (int m = 1; m < mc; ++m) {
    Kahan ac, bc;
    int k = 0;  // k = (m*j) mod n, advanced incrementally (exact reduction)
    for (int j = 0; j < n; ++j) {
      ac.add(f[j] * tt.c[static_cast<std::size_t>(k)]);
      bc.add(f[j] * tt.s[static_cast<std::size_t>(k)]);
      k += m;
      if (k >= n) k -= n;
    }
    out.a[static_cast<std::size_t>(m)] = kSqrt2 * ac.value() / n;
    out.b[static_cast<std::size_t>(m)] = kSqrt2 * bc.value() / n;
  }
  return out;
}

GridFunction synthesize(const SpectralCoeffs& c) {
  const int n = c.n;
  const TrigTable& tt = trig_table(n);
  GridFunction out(n);
  const int mc = c.mode_count();
  for (int j = 0; j < n; ++j) {
    Kahan acc;
    acc.add(c.a[0]);
    int k = 0;  // k = (m*j) mod n as m runs
    for (int m = 1; m < mc; ++m) {
      k += j;
      if (k >= n) k -= n;
      acc.add(kSqrt2 * (c.a[static_cast<std::size_t>(m)] * tt.c[static_cast<std::size_t>(k)] +
                        c.b[static_cast<std::size_t>(m)] * tt.s[static_cast<std::size_t>(k)]));
    }
    out[j] = acc.value();
  }
  return out;
}

double eigenvalue(int m, int n) {
  GridFunction::check_cell_count(n);
  if (m < 0 || m > (n - 1) / 2)
    throw std::out_of_range("eigenvalue: mode index out of range");
  double s = std::sin(kPi * static_cast<double>(m) / static_cast<double>(n));
  return 4.0 * static_cast<double>(n) * static_cast<double>(n) * s * s;
}

double sobolev_norm(const SpectralCoeffs& c, SobolevIndex alpha) {
  Kahan acc;
  const int mc = c.mode_count();
  for (int m = 0; m < mc; ++m) {
    double w = std::pow(1.0 + eigenvalue(m, c.n), alpha.alpha);
    acc.add(w * (c.a[static_cast<std::size_t>(m)] * c.a[static_cast<std::size_t>(m)] +
                 c.b[static_cast<std::size_t>(m)] * c.b[static_cast<std::size_t>(m)]));
  }
  return std::sqrt(acc.value());
}

double sobolev_norm(const GridFunction& f, SobolevIndex alpha) {
  return sobolev_norm(analyze(f), alpha);
}

double continuum_norm(const SpectralCoeffs& c, double alpha) {
  Kahan acc;
  const int mc = c.mode_count();
  for (int m = 0; m < mc; ++m) {
    double lam = (2.0 * kPi * m) * (2.0 * kPi * m);
    double w = std::pow(1.0 + lam, alpha);
    acc.add(w * (c.a[static_cast<std::size_t>(m)] * c.a[static_cast<std::size_t>(m)] +
                 c.b[static_cast<std::size_t>(m)] * c.b[static_cast<std::size_t>(m)]));
  }
  return std::sqrt(acc.value());
}

double inner(const GridFunction& f, const GridFunction& g) {
  if (f.n != g.n) throw std::invalid_argument("inner: size mismatch");
  Kahan acc;
  for (int j = 0; j < f.n; ++j) acc.add(f[j] * g[j]);
  return acc.value() / f.n;
}

GridFunction discrete_laplacian(const GridFunction& f) {
  const int n = f.n;
  const double n2 = static_cast<double>(n) * n;
  GridFunction out(n);
  for (int j = 0; j < n; ++j) {
    double right = f[(j + 1) % n];
    double left = f[(j + n - 1) % n];
    out[j] = n2 * (right - 2.0 * f[j] + left);
  }
  return out;
}

GridFunction discrete_gradient(const GridFunction& f, GradDir dir) {
  const int n = f.n;
  GridFunction out(n);
  for (int j = 0; j < n; ++j) {
    double neigh = (dir == GradDir::Forward) ? f[(j + 1) % n] : f[(j + n - 1) % n];
    out[j] = static_cast<double>(n) * (neigh - f[j]);
  }
  return out;
}

SpectralCoeffs heat_semigroup(const SpectralCoeffs& c, double t) {
  if (t < 0.0) throw std::invalid_argument("heat_semigroup: negative time");
  SpectralCoeffs out = c;
  const int mc = c.mode_count();
  for (int m = 0; m < mc; ++m) {
    double mult = std::exp(-eigenvalue(m, c.n) * t);
    out.a[static_cast<std::size_t>(m)] *= mult;
    out.b[static_cast<std::size_t>(m)] *= mult;
  }
  return out;
}

GridFunction heat_semigroup(const GridFunction& f, double t) {
  return synthesize(heat_semigroup(analyze(f), t));
}

SpectralCoeffs convolve_coeffs(const SpectralCoeffs& ca, const SpectralCoeffs& cb) {
  if (ca.n != cb.n) throw std::invalid_argument("convolve: size mismatch");
  SpectralCoeffs out(ca.n);
  out.a[0] = ca.a[0] * cb.a[0];
  const int mc = ca.mode_count();
  // With u_hat(m) = (a_m - i b_m)/sqrt(2) for m >= 1, the convolution is the
  // plain product u_hat v_hat, which in the real pairs reads as below.
  for (int m = 1; m < mc; ++m) {
    auto mm = static_cast<std::size_t>(m);
    out.a[mm] = (ca.a[mm] * cb.a[mm] - ca.b[mm] * cb.b[mm]) / kSqrt2;
    out.b[mm] = (ca.a[mm] * cb.b[mm] + ca.b[mm] * cb.a[mm]) / kSqrt2;
  }
  return out;
}

GridFunction discrete_convolve(const GridFunction& a, const GridFunction& b) {
  if (a.n != b.n) throw std::invalid_argument("discrete_convolve: size mismatch");
  return synthesize(convolve_coeffs(analyze(a), analyze(b)));
}

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; mirrored).
constexpr int kGL = 8;
constexpr double kGLx[kGL] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
constexpr double kGLw[kGL] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

template <class F>
double gl16(F&& f, double lo, double hi) {
  double mid = 0.5 * (lo + hi);
  double half = 0.5 * (hi - lo);
  double sum = 0.0;
  for (int i = 0; i < kGL; ++i) {
    sum += kGLw[i] * (f(mid + half * kGLx[i]) + f(mid - half * kGLx[i]));
  }
  return sum * half;
}

template <class F>
double composite_gl(F&& f, double lo, double hi, int panels) {
  Kahan acc;
  double w = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) acc.add(gl16(f, lo + p * w, lo + (p + 1) * w));
  return acc.value();
}

double bump_unnormalized(double z) {
  if (std::abs(z) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - z * z));
}

double bump_mass() {
  // int_{-1}^{1} exp(-1/(1-z^2)) dz, computed once to full precision.
  static const double mass = composite_gl([](double z) { return bump_unnormalized(z); },
                                          -1.0, 1.0, 4096);
  return mass;
}

}  // namespace

GridFunction mollifier(double epsilon, int n) {
  GridFunction::check_cell_count(n);
  if (!(epsilon > 0.0) || !(epsilon < 0.5))
    throw std::invalid_argument("mollifier: epsilon must lie in (0, 1/2)");
  const double norm = 1.0 / bump_mass();
  auto rho_eps = [&](double x) {
    // periodic wrap of [0,1) to [-1/2, 1/2)
    double y = x - std::floor(x);
    if (y >= 0.5) y -= 1.0;
    return (norm / epsilon) * bump_unnormalized(y / epsilon);
  };
  GridFunction out(n);
  for (int j = 0; j < n; ++j) {
    double lo = static_cast<double>(j) / n;
    double hi = static_cast<double>(j + 1) / n;
    // 64 panels x 16 points per cell: far beyond the needed 32 points, and
    // accurate through the support edges where the bump flattens out.
    out[j] = n * composite_gl(rho_eps, lo, hi, 64);
  }
  return out;
}

GridFunction project_step(const GridFunction& fine, int n) {
  GridFunction::check_cell_count(n);
  if (n > fine.n) throw std::invalid_argument("project_step: n exceeds the fine resolution");
  const int m = fine.n;
  GridFunction out(n);
  for (int j = 0; j < n; ++j) {
    double lo = static_cast<double>(j) / n;
    double hi = static_cast<double>(j + 1) / n;
    int k0 = static_cast<int>(std::floor(lo * m));
    int k1 = static_cast<int>(std::ceil(hi * m));
    Kahan acc;
    for (int k = k0; k < k1; ++k) {
      double clo = std::max(lo, static_cast<double>(k) / m);
      double chi = std::min(hi, static_cast<double>(k + 1) / m);
      if (chi > clo) acc.add((chi - clo) * fine[k % m]);
    }
    out[j] = acc.value() * n;
  }
  return out;
}

GridFunction project_reference(const SpectralCoeffs& c, int n) {
  GridFunction::check_cell_count(n);
  if (n > c.n) throw std::invalid_argument("project_reference: n exceeds reference resolution");
  const TrigTable& tt = trig_table(n);
  GridFunction out(n);
  const int mc = c.mode_count();
  // Average of cos(2 pi m x) over I_j equals sinc(pi m / n) cos(2 pi m x_mid),
  // x_mid = (j + 1/2)/n; same for sin. Midpoint angles live on the half grid.
  std::vector<double> sinc(static_cast<std::size_t>(mc), 1.0);
  for (int m = 1; m < mc; ++m) {
    double x = kPi * static_cast<double>(m) / n;
    sinc[static_cast<std::size_t>(m)] = std::sin(x) / x;
  }
  for (int j = 0; j < n; ++j) {
    Kahan acc;
    acc.add(c.a[0]);
    long long q = 0;  // q = m (2j+1) mod 2n
    const int step = (2 * j + 1) % (2 * n);
    for (int m = 1; m < mc; ++m) {
      q += step;
      if (q >= 2 * n) q -= 2 * n;
      acc.add(kSqrt2 * sinc[static_cast<std::size_t>(m)] *
              (c.a[static_cast<std::size_t>(m)] * tt.ch[static_cast<std::size_t>(q)] +
               c.b[static_cast<std::size_t>(m)] * tt.sh[static_cast<std::size_t>(q)]));
    }
    out[j] = acc.value();
  }
  return out;
}

}  // namespace meso::spectral
