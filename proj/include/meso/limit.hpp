#pragma once

// Deterministic solvers for the limit system
//   du/dt = Lap u + R_C(u, v),   dv/dt = R_D(u, v)
// (Fourier collocation in space, Strang splitting in time with an exact
// spectral diffusion step), for the lattice PDE driven by an external
// discrete-scale path, and for the closed memory-form representation of v.

#include <string>
#include <vector>

#include "meso/grid.hpp"
#include "meso/reaction.hpp"

namespace meso::pde {

struct LimitSolution {
  int m_ref = 0;                    // collocation count (odd)
  double dt = 0.0;
  std::string method = "strang(rk4, spectral)";
  std::vector<double> times;        // sample grid
  std::vector<SpectralCoeffs> u;    // trig coefficients of u at the samples
  std::vector<GridFunction> v;      // collocation values of v at the samples
  double max_principle_margin = 0.0;  // max_t ||u||_inf - max(M, ||u0||_inf)

  // Dense per-step collocation values of u (only when requested; feeds the
  // memory-form quadrature).
  std::vector<double> dense_times;
  std::vector<std::vector<double>> dense_u;
};

struct LatticeSolution {
  int n = 0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<GridFunction> w;
  double sup_bound_margin = 0.0;    // max_t ||w||_inf - max(M, ||w0||_inf)
};

/// Piecewise-constant-in-time discrete-scale driver for the lattice PDE
/// (matches the cadlag sample paths produced by the simulator).
struct DrivingPath {
  std::vector<double> times;        // sorted, starting at 0
  std::vector<GridFunction> values;

  const GridFunction& at(double t) const;
};

LimitSolution solve_limit(const model::ReactionNetwork& net, const SpectralCoeffs& u0,
                          const GridFunction& v0, double T, double dt, int m_ref,
                          std::vector<double> sample_times = {}, bool record_dense = false);

LatticeSolution solve_lattice_pde(const model::ReactionNetwork& net, const GridFunction& u0,
                                  const DrivingPath& v_path, double T, double dt,
                                  std::vector<double> sample_times = {});

/// v(t) = e^{d_D t} v(0) + int_0^t e^{d_D (t-s)} b_D(u(s)) ds evaluated per
/// collocation point with exponentially-weighted trapezoid quadrature on the
/// solution's dense grid. Returns one GridFunction per requested time (the
/// dense-grid times of `sol`).
std::vector<GridFunction> memory_form_v(const model::ReactionNetwork& net,
                                        const LimitSolution& sol, const GridFunction& v0);

}  // namespace meso::pde
