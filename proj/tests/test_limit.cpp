#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "meso/limit.hpp"
#include "meso/spectral.hpp"
#include "test_util.hpp"

using namespace meso;
using namespace meso::pde;
using model::builtin_network;
using model::ReactionNetwork;
using testutil::max_abs_diff;

namespace {
constexpr double kPi = std::numbers::pi;

ReactionNetwork d_only(double birth, double death, double M = 10.0) {
  std::vector<model::Reaction> rs;
  if (birth != 0.0)
    rs.push_back({model::Species::D, +1, 0.0, 0.0, model::SmoothCoefficient::constant(birth)});
  if (death != 0.0)
    rs.push_back({model::Species::D, -1, 0.0, death, model::SmoothCoefficient::zero()});
  return ReactionNetwork(std::move(rs), M, "d-only");
}

}  // namespace

TEST_CASE("solve_limit: heat eigenmode decays exactly") {
  ReactionNetwork net = builtin_network("pure-diffusion");
  const int m_ref = 31;
  SpectralCoeffs u0(m_ref);
  u0.a[1] = 1.0;  // phi_1 mode
  GridFunction v0(m_ref, 0.0);
  const double T = 0.1;
  LimitSolution sol = solve_limit(net, u0, v0, T, 1e-3, m_ref, {0.0, 0.05, T});
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    double expect = std::exp(-4.0 * kPi * kPi * sol.times[k]);
    CHECK(sol.u[k].a[1] == doctest::Approx(expect).epsilon(1e-12));
    // all other modes stay at zero
    for (int m = 0; m < sol.u[k].mode_count(); ++m) {
      if (m == 1) continue;
      CHECK(std::abs(sol.u[k].a[static_cast<std::size_t>(m)]) < 1e-12);
      CHECK(std::abs(sol.u[k].b[static_cast<std::size_t>(m)]) < 1e-12);
    }
  }
}

TEST_CASE("solve_limit: constant discrete source integrates v = t") {
  // d_D = 0, b_D = 1: v(t) = t exactly (RK4 is exact on constants)
  ReactionNetwork net = d_only(1.0, 0.0);
  const int m_ref = 15;
  SpectralCoeffs u0(m_ref);
  GridFunction v0(m_ref, 0.0);
  LimitSolution sol = solve_limit(net, u0, v0, 0.8, 1e-3, m_ref, {0.0, 0.4, 0.8});
  for (std::size_t k = 0; k < sol.times.size(); ++k)
    for (int j = 0; j < m_ref; ++j)
      CHECK(sol.v[k][j] == doctest::Approx(sol.times[k]).epsilon(1e-12));
}

TEST_CASE("solve_limit: Strang splitting is second order") {
  ReactionNetwork net = builtin_network("coupled-gene");
  const int m_ref = 31;
  SpectralCoeffs u0(m_ref);
  u0.a[0] = 0.5;
  u0.a[1] = 0.15;
  u0.b[2] = 0.1;
  GridFunction v0(m_ref, 2.0);
  const double T = 0.25;
  auto run = [&](double dt) {
    LimitSolution s = solve_limit(net, u0, v0, T, dt, m_ref, {0.0, T});
    return spectral::synthesize(s.u.back());
  };
  GridFunction u1 = run(2e-3), u2 = run(1e-3), u4 = run(5e-4);
  double e12 = max_abs_diff(u1, u2);
  double e24 = max_abs_diff(u2, u4);
  double order = std::log2(e12 / e24);
  CHECK(order > 1.7);
  CHECK(order < 2.3);
}

TEST_CASE("solve_limit: maximum principle within tolerance") {
  ReactionNetwork net = builtin_network("coupled-gene");
  const int m_ref = 63;
  SpectralCoeffs u0(m_ref);
  u0.a[0] = 0.8;
  u0.a[2] = 0.3;
  GridFunction v0(m_ref, 2.0);
  LimitSolution sol = solve_limit(net, u0, v0, 1.0, 1e-3, m_ref, {0.0, 1.0});
  CHECK(sol.max_principle_margin <= 1e-8);
}

TEST_CASE("solve_limit: rejects bad steps and runaway states") {
  ReactionNetwork net = builtin_network("coupled-gene");
  SpectralCoeffs u0(15);
  GridFunction v0(15, 0.0);
  CHECK_THROWS(solve_limit(net, u0, v0, 1.0, 0.0, 15));
  CHECK_THROWS(solve_limit(net, u0, v0, 1.0, -1e-3, 15));

  // strong constant production pushes u past M + 2 and must abort
  std::vector<model::Reaction> rs;
  rs.push_back({model::Species::C, +1, 0.0, 0.0, model::SmoothCoefficient::constant(50.0)});
  ReactionNetwork blowup(std::move(rs), 0.5, "blowup");
  SpectralCoeffs u00(15);
  CHECK_THROWS(solve_limit(blowup, u00, v0, 1.0, 1e-3, 15));
}

TEST_CASE("memory form agrees with the solver's v") {
  ReactionNetwork net = builtin_network("coupled-gene");
  const int m_ref = 31;
  SpectralCoeffs u0(m_ref);
  u0.a[0] = 0.5;
  u0.a[1] = 0.2;
  GridFunction v0(m_ref, 2.0);
  const double T = 1.0, dt = 1e-4;
  LimitSolution sol =
      solve_limit(net, u0, v0, T, dt, m_ref, {0.0, T}, /*record_dense=*/true);
  std::vector<GridFunction> vmem = memory_form_v(net, sol, v0);
  REQUIRE(vmem.size() == sol.dense_times.size());
  CHECK(max_abs_diff(vmem.back(), sol.v.back()) <= 1e-6);
}

TEST_CASE("memory form degenerate cases") {
  // b_D = 0: v(t) = exp(d_D t) v0
  ReactionNetwork death = d_only(0.0, 1.0);
  const int m_ref = 15;
  SpectralCoeffs u0(m_ref);
  GridFunction v0(m_ref, 3.0);
  LimitSolution sol = solve_limit(death, u0, v0, 0.5, 1e-3, m_ref, {0.0, 0.5}, true);
  std::vector<GridFunction> vmem = memory_form_v(death, sol, v0);
  for (int j = 0; j < m_ref; ++j)
    CHECK(vmem.back()[j] == doctest::Approx(3.0 * std::exp(-0.5)).epsilon(1e-10));

  // d_D = 0: v(t) = v0 + int b_D(u)
  ReactionNetwork birth = d_only(1.5, 0.0);
  LimitSolution sol2 = solve_limit(birth, u0, v0, 0.5, 1e-3, m_ref, {0.0, 0.5}, true);
  std::vector<GridFunction> vmem2 = memory_form_v(birth, sol2, v0);
  for (int j = 0; j < m_ref; ++j)
    CHECK(vmem2.back()[j] == doctest::Approx(3.0 + 1.5 * 0.5).epsilon(1e-10));

  CHECK_THROWS(memory_form_v(birth, solve_limit(birth, u0, v0, 0.1, 1e-3, m_ref), v0));
}

TEST_CASE("solve_lattice_pde: zero driver reduces to the discrete heat flow") {
  ReactionNetwork net = builtin_network("pure-diffusion");
  const int n = 31;
  rng::Xoshiro256pp gen(5);
  GridFunction u0 = testutil::random_grid(n, gen, 1.0);
  const double T = 0.05;
  DrivingPath vp;
  vp.times = {0.0, T};
  vp.values = {GridFunction(n, 0.0), GridFunction(n, 0.0)};
  LatticeSolution sol = solve_lattice_pde(net, u0, vp, T, 1e-4, {0.0, T});
  GridFunction expect = spectral::heat_semigroup(u0, T);
  CHECK(max_abs_diff(sol.w.back(), expect) < 1e-10);
}

TEST_CASE("solve_lattice_pde: validates the driver coverage") {
  ReactionNetwork net = builtin_network("pure-diffusion");
  GridFunction u0(15, 0.5);
  DrivingPath vp;  // empty
  CHECK_THROWS(solve_lattice_pde(net, u0, vp, 1.0, 1e-3));
}

TEST_CASE("lattice PDE converges to the continuum solution in n") {
  // reference at a fine collocation resolution, driven by a smooth analytic
  // discrete-scale path; the lattice solutions approach its projection
  ReactionNetwork net = builtin_network("gene-toggle");
  const int m_ref = 255;
  const double T = 0.25, dt = 2e-4, beta = 0.2;

  auto v_at = [&](double t, double x) {
    return 1.0 + 0.5 * std::cos(2.0 * kPi * x) * std::exp(-t);
  };
  auto driver_for = [&](int n) {
    DrivingPath vp;
    const int steps = 512;
    for (int k = 0; k <= steps; ++k) {
      double t = T * k / steps;
      GridFunction v(n);
      for (int j = 0; j < n; ++j) v[j] = v_at(t, (j + 0.5) / n);
      vp.times.push_back(t);
      vp.values.push_back(std::move(v));
    }
    return vp;
  };

  SpectralCoeffs u0c(m_ref);
  u0c.a[0] = 0.6;
  u0c.a[1] = 0.2;
  u0c.b[2] = 0.1;

  // reference: the same lattice PDE at a much finer resolution
  LatticeSolution ref = solve_lattice_pde(net, spectral::project_reference(u0c, m_ref),
                                          driver_for(m_ref), T, dt, {0.0, T});

  double prev = 1e18;
  for (int n : {15, 31, 63}) {
    GridFunction u0n = spectral::project_reference(u0c, n);
    LatticeSolution sol = solve_lattice_pde(net, u0n, driver_for(n), T, dt, {0.0, T});
    GridFunction pn_ref = spectral::project_step(ref.w.back(), n);
    double err = spectral::sobolev_norm(sol.w.back() - pn_ref, SobolevIndex(beta));
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("lattice PDE output is stable under driver perturbations") {
  ReactionNetwork net = builtin_network("coupled-gene");
  const int n = 31;
  const double T = 0.2, dt = 2e-4;
  GridFunction u0(n, 0.5);

  auto driver = [&](double offset) {
    DrivingPath vp;
    for (int k = 0; k <= 64; ++k) {
      double t = T * k / 64;
      GridFunction v(n);
      for (int j = 0; j < n; ++j)
        v[j] = 2.0 + offset + 0.3 * std::sin(2.0 * kPi * j / n) * std::exp(-t);
      vp.times.push_back(t);
      vp.values.push_back(std::move(v));
    }
    return vp;
  };

  LatticeSolution a = solve_lattice_pde(net, u0, driver(0.0), T, dt, {0.0, T});
  LatticeSolution b = solve_lattice_pde(net, u0, driver(0.05), T, dt, {0.0, T});
  double dw = linf_norm(a.w.back() - b.w.back());
  // Lipschitz response: the output gap stays of the order of the input gap
  CHECK(dw > 0.0);
  CHECK(dw < 10.0 * 0.05);
}
