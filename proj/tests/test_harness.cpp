#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "meso/harness.hpp"
#include "meso/io.hpp"
#include "meso/spectral.hpp"

using namespace meso;
using namespace meso::harness;
using model::builtin_network;

TEST_CASE("plan validation catches malformed inputs") {
  ExperimentPlan p;
  p.grid = {{31, 50.0, 10}, {63, 90.0, 10}};
  CHECK(p.validate().empty());

  ExperimentPlan even = p;
  even.grid[0].n = 32;
  CHECK(!even.validate().empty());

  ExperimentPlan badidx = p;
  badidx.alpha = 0.3;
  badidx.beta = 0.2;
  CHECK(!badidx.validate().empty());

  ExperimentPlan badkappa = p;
  badkappa.grid = {{31, 400.0, 10}, {63, 90.0, 10}};  // kappa decreasing
  CHECK(!badkappa.validate().empty());

  ExperimentPlan fracv = p;
  fracv.v0_const = 1.5;
  CHECK(!fracv.validate().empty());
}

TEST_CASE("plan json round-trip and scaling rule") {
  ExperimentPlan p;
  p.network = "coupled-gene";
  p.grid = {{31, 0.0, 20}, {63, 0.0, 20}, {127, 0.0, 20}};
  p.scaling_c = 1.0;
  p.beta = 0.2;
  p.scaling_delta = 1.0;
  p.T = 0.2;
  p.master_seed = 9;
  ExperimentPlan q = ExperimentPlan::from_json(p.to_json());
  CHECK(q.network == p.network);
  CHECK(q.grid.size() == 3);
  CHECK(q.master_seed == 9);
  CHECK(q.T == doctest::Approx(p.T));
  // l(n) = ceil(n^{0.4} log(n)^2)
  CHECK(q.scaled_l(31) == doctest::Approx(std::ceil(std::pow(31.0, 0.4) *
                                                    std::pow(std::log(31.0), 2.0))));
  CHECK(q.validate().empty());
}

TEST_CASE("inequality probes pass on a reduced sweep") {
  ProbeReport rep = inequality_probes({31, 63, 127}, 120, 2024);
  for (const ProbeResult& r : rep.results) {
    INFO(r.name, " slope=", r.slope, " note=", r.note);
    CHECK(r.pass);
  }
}

TEST_CASE("zd decay study: slope beats the theorem bound") {
  SlopeReport rep = zd_decay_study(builtin_network("d-birth-death"), {15, 31, 63}, 60, 0.4,
                                   1.0, 10, 31337);
  CHECK(!rep.degenerate);
  CHECK(rep.fit.slope <= -0.3);
  CHECK(rep.slope_ci.hi < 0.0);
  CHECK(rep.passes());
  // decay means are positive and decreasing
  for (std::size_t i = 1; i < rep.mean_sq.size(); ++i)
    CHECK(rep.mean_sq[i] < rep.mean_sq[i - 1]);
}

TEST_CASE("zd decay study: no discrete reactions degenerates cleanly") {
  SlopeReport rep =
      zd_decay_study(builtin_network("birth-death-C"), {15, 31, 63}, 5, 0.4, 0.5, 5, 1);
  CHECK(rep.degenerate);
  CHECK(rep.passes());
  for (double m : rep.mean_sq) CHECK(m == 0.0);
}

TEST_CASE("yn tail study: exceedance frequencies fall with the population scale") {
  TailReport rep = yn_tail_study(builtin_network("birth-death-C"), 15, {30.0, 120.0, 480.0},
                                 {0.08, 0.15}, 120, 0.2, 0.15, 10, 99);
  CHECK(rep.monotone_inf);
  CHECK(rep.monotone_beta);
  REQUIRE(rep.cells.size() == 6);
  // the smallest l at the tightest eps must actually exceed sometimes,
  // otherwise the monotonicity check is vacuous
  CHECK(rep.cells[0].freq_inf > 0.0);
}

TEST_CASE("compensator study: confidence intervals cover zero") {
  AuditReport rep =
      compensator_study(builtin_network("birth-death-C"), 15, 60.0, 250, 0.2, 10, 4242);
  REQUIRE(rep.rows.size() == 3);
  for (const AuditRow& row : rep.rows) {
    INFO(row.probe, " mean_diff=", row.mean_diff, " ci=[", row.ci.lo, ",", row.ci.hi, "]");
    CHECK(row.pass);
  }
}

TEST_CASE("lln study: reports are complete, positive and deterministic") {
  ExperimentPlan p;
  p.network = "coupled-gene";
  p.grid = {{15, 80.0, 12}, {31, 160.0, 12}};
  p.alpha = 0.1;
  p.beta = 0.2;
  p.T = 0.1;
  p.sample_count = 6;
  p.m_ref = 127;
  p.dt = 5e-4;
  p.master_seed = 777;
  REQUIRE(p.validate().empty());

  ErrorReport rep1 = run_lln(p);
  REQUIRE(rep1.rows.size() == 2);
  for (const LlnRow& row : rep1.rows) {
    CHECK(row.aborted == 0);
    CHECK(row.err_u_beta.median > 0.0);
    CHECK(row.err_u_inf.median > 0.0);
    CHECK(row.err_v_alpha.median > 0.0);
    CHECK(row.err_u_beta.median_ci.lo <= row.err_u_beta.median);
    CHECK(row.err_u_beta.median_ci.hi >= row.err_u_beta.median);
  }

  ErrorReport rep2 = run_lln(p);
  CHECK(io::lln_report_json(p, rep1) == io::lln_report_json(p, rep2));
  CHECK(io::lln_report_csv(rep1) == io::lln_report_csv(rep2));

  // metric two-ways agreement: discrete norm of difference vs coefficient
  // distance (linearity of the transform)
  rng::Xoshiro256pp gen(31415);
  for (int trial = 0; trial < 20; ++trial) {
    GridFunction a(15), b(15);
    for (int j = 0; j < 15; ++j) {
      a[j] = gen.normal();
      b[j] = gen.normal();
    }
    double direct = spectral::sobolev_norm(a - b, SobolevIndex(0.3));
    SpectralCoeffs ca = spectral::analyze(a), cb = spectral::analyze(b);
    SpectralCoeffs dc(15);
    for (std::size_t m = 0; m < ca.a.size(); ++m) {
      dc.a[m] = ca.a[m] - cb.a[m];
      dc.b[m] = ca.b[m] - cb.b[m];
    }
    CHECK(direct == doctest::Approx(spectral::sobolev_norm(dc, SobolevIndex(0.3)))
                        .epsilon(1e-10));
  }
}

TEST_CASE("lln study: degenerate self-comparison gives zero error") {
  // feed the reference's own projection through the metric path
  ExperimentPlan p;
  p.m_ref = 63;
  p.T = 0.1;
  p.dt = 1e-3;
  const int n = 15;
  auto samples = sim::SimConfig::uniform_samples(p.T, 4);
  SpectralCoeffs u0c = p.u0_coeffs(p.m_ref);
  GridFunction v0(p.m_ref, p.v0_const);
  pde::LimitSolution ref = pde::solve_limit(builtin_network("coupled-gene"), u0c, v0, p.T,
                                            p.dt, p.m_ref, samples);
  for (std::size_t k = 0; k < ref.times.size(); ++k) {
    GridFunction pu = spectral::project_reference(ref.u[k], n);
    GridFunction again = spectral::project_reference(ref.u[k], n);
    CHECK(spectral::sobolev_norm(pu - again, SobolevIndex(p.beta)) == 0.0);
  }
}

TEST_CASE("parallel replicas agree with serial execution") {
  std::vector<double> serial(64, 0.0), parallel(64, 0.0);
  parallel_replicas(64, 1, [&](int i) {
    rng::Xoshiro256pp gen = rng::Xoshiro256pp::substream(5, static_cast<std::uint64_t>(i));
    serial[static_cast<std::size_t>(i)] = gen.uniform();
  });
  parallel_replicas(64, 4, [&](int i) {
    rng::Xoshiro256pp gen = rng::Xoshiro256pp::substream(5, static_cast<std::uint64_t>(i));
    parallel[static_cast<std::size_t>(i)] = gen.uniform();
  });
  CHECK(serial == parallel);
}
