#pragma once

// Shared helpers for the test suites.

#include <cmath>

#include "meso/grid.hpp"
#include "meso/rng.hpp"
#include "meso/spectral.hpp"

namespace testutil {

/// Random coefficients with spectral decay (1+m)^{-p}; p = 0 gives white data.
inline meso::SpectralCoeffs random_coeffs(int n, meso::rng::Xoshiro256pp& gen, double p = 0.0) {
  meso::SpectralCoeffs c(n);
  for (int m = 0; m < c.mode_count(); ++m) {
    double w = std::pow(1.0 + m, -p);
    c.a[static_cast<std::size_t>(m)] = gen.normal() * w;
    if (m > 0) c.b[static_cast<std::size_t>(m)] = gen.normal() * w;
  }
  return c;
}

inline meso::GridFunction random_grid(int n, meso::rng::Xoshiro256pp& gen, double p = 0.0) {
  return meso::spectral::synthesize(random_coeffs(n, gen, p));
}

inline double max_abs_diff(const meso::GridFunction& f, const meso::GridFunction& g) {
  return meso::linf_norm(f - g);
}

}  // namespace testutil
