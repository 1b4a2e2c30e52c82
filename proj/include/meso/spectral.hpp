#pragma once

// Discrete Sobolev toolkit on the odd periodic lattice: trigonometric
// transforms, H_N^alpha norms, difference operators, heat semigroup,
// periodic convolution, mollifiers and cell-average projections.
//
// Conventions. The inner product on step functions is the L2 one,
// <f, g> = (1/n) sum_j f_j g_j. The eigenbasis is phi_0 = 1,
// phi_m = sqrt(2) cos(2 pi m j / n), psi_m = sqrt(2) sin(2 pi m j / n)
// for 1 <= m <= (n-1)/2, with eigenvalues
// lambda_{m,n} = 2 n^2 (1 - cos(2 pi m / n)) = 4 n^2 sin^2(pi m / n).

#include <memory>

#include "meso/grid.hpp"

namespace meso::spectral {

/// Cached tables of cos/sin on the exact lattice angles. `c[k]` holds
/// cos(2 pi k / n) for k in [0, n); arguments are reduced mod n as integers
/// before lookup, so no large-angle precision loss occurs. The half tables
/// hold cos/sin(pi q / n) for q in [0, 2n) and serve midpoint evaluations.
struct TrigTable {
  int n;
  std::vector<double> c, s;        // full grid, size n
  std::vector<double> ch, sh;      // half grid, size 2n

  explicit TrigTable(int n_);
};

/// Shared table registry, keyed by n. Thread-safe; tables are immutable.
const TrigTable& trig_table(int n);

// -- transforms ---------------------------------------------------------

/// Coefficients of f in the eigenbasis (compensated direct O(n^2) sums).
SpectralCoeffs analyze(const GridFunction& f);

/// Inverse of analyze: f_j = a_0 + sqrt(2) sum_m (a_m cos + b_m sin).
GridFunction synthesize(const SpectralCoeffs& c);

/// lambda_{m,n} = 4 n^2 sin^2(pi m / n). Requires 0 <= m <= (n-1)/2.
double eigenvalue(int m, int n);

// -- norms --------------------------------------------------------------

double sobolev_norm(const SpectralCoeffs& c, SobolevIndex alpha);
double sobolev_norm(const GridFunction& f, SobolevIndex alpha);

/// Continuous-space H^alpha norm of the trigonometric polynomial with the
/// given coefficients (weights (1 + (2 pi m)^2)^alpha).
double continuum_norm(const SpectralCoeffs& c, double alpha);

/// <f, g> = (1/n) sum_j f_j g_j.
double inner(const GridFunction& f, const GridFunction& g);

// -- lattice operators --------------------------------------------------

/// n^2 (f(x+1/n) - 2 f(x) + f(x-1/n)), periodic.
GridFunction discrete_laplacian(const GridFunction& f);

enum class GradDir { Forward, Backward };

/// n (f(x +- 1/n) - f(x)), periodic.
GridFunction discrete_gradient(const GridFunction& f, GradDir dir);

/// Heat semigroup generated by the discrete Laplacian: mode m is scaled
/// by exp(-lambda_{m,n} t). Requires t >= 0.
GridFunction heat_semigroup(const GridFunction& f, double t);
SpectralCoeffs heat_semigroup(const SpectralCoeffs& c, double t);

/// Periodic convolution (a * b)_k = (1/n) sum_l a_{k-l} b_l, evaluated
/// through the transforms (mode-wise product of complex coefficients).
GridFunction discrete_convolve(const GridFunction& a, const GridFunction& b);

/// Mode-wise complex product of coefficients; the transform-side image of
/// discrete_convolve.
SpectralCoeffs convolve_coeffs(const SpectralCoeffs& ca, const SpectralCoeffs& cb);

// -- projections and mollifiers -----------------------------------------

/// Cell averages on n cells of the smooth bump
/// rho^eps(y) = eps^{-1} rho(y/eps), rho(z) = C exp(-1/(1-z^2)) on (-1,1),
/// centred at 0 and treated 1-periodically. Requires 0 < eps < 1/2.
GridFunction mollifier(double epsilon, int n);

/// Exact cell averages on n cells of the trigonometric polynomial with
/// coefficients c (resolution M >= n): average of cos(2 pi m x) over a cell
/// is the sinc-weighted cosine at the cell midpoint.
GridFunction project_reference(const SpectralCoeffs& c, int n);

/// Exact cell averages of a fine step function onto n coarser cells
/// (piecewise integration over the overlaps). The right projection when the
/// reference itself is a lattice function; the trigonometric route would
/// carry its interpolation wiggles along.
GridFunction project_step(const GridFunction& fine, int n);

}  // namespace meso::spectral
