// Acceptance suite: every quantitative exit criterion, each printed as one
// [PASS]/[FAIL] line with its measured values and wall time. Criteria can be
// run selectively: ./acceptance 3 7 12. Exit code = number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "meso/cli.hpp"
#include "meso/harness.hpp"
#include "meso/io.hpp"
#include "meso/limit.hpp"
#include "meso/simulator.hpp"
#include "meso/spectral.hpp"
#include "meso/stats.hpp"

using namespace meso;
using model::builtin_network;
using model::ReactionNetwork;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void info(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", x);
  return buf;
}

GridFunction eigenmode(int m, int n, bool sine) {
  GridFunction g(n);
  for (int j = 0; j < n; ++j) {
    double th = 2.0 * kPi * m * j / n;
    g[j] = m == 0 ? 1.0 : std::numbers::sqrt2 * (sine ? std::sin(th) : std::cos(th));
  }
  return g;
}

// ---------------------------------------------------------------- criterion 1

Outcome criterion1_spectral_exactness() {
  Outcome out;
  rng::Xoshiro256pp gen(101);
  for (int n : {5, 31, 127, 501}) {
    for (int m = 0; m <= (n - 1) / 2; ++m) {
      double lam = spectral::eigenvalue(m, n);
      for (bool sine : {false, true}) {
        if (m == 0 && sine) continue;
        GridFunction e = eigenmode(m, n, sine);
        GridFunction lap = spectral::discrete_laplacian(e);
        double err = linf_norm(lap + lam * e);
        double scale = std::max(1.0, lam);
        out.require(err <= 1e-10 * scale,
                    "eigenrelation n=" + std::to_string(n) + " m=" + std::to_string(m));
      }
    }
    GridFunction f(n);
    for (int j = 0; j < n; ++j) f[j] = gen.normal();
    GridFunction back = spectral::synthesize(spectral::analyze(f));
    out.require(linf_norm(f - back) <= 1e-12 * std::max(1.0, linf_norm(f)),
                "roundtrip n=" + std::to_string(n));
  }
  return out;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2_eigenvalue_equivalence() {
  Outcome out;
  double worst_hi = 0.0, worst_lo = 2.0;
  for (int n = 3; n <= 1001; n += 2) {
    for (int m = 1; m <= (n - 1) / 2; ++m) {
      double ratio = spectral::eigenvalue(m, n) / std::pow(2.0 * kPi * m, 2);
      worst_hi = std::max(worst_hi, ratio);
      worst_lo = std::min(worst_lo, ratio);
    }
  }
  out.require(worst_hi <= 1.0 + 1e-12, "upper bound violated: " + fmt(worst_hi));
  out.require(worst_lo >= 4.0 / (kPi * kPi) - 1e-12, "lower bound violated: " + fmt(worst_lo));
  out.info("ratio in [" + fmt(worst_lo) + ", " + fmt(worst_hi) + "], bounds [4/pi^2, 1]");
  return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3_indicator_norms() {
  Outcome out;
  const double C = 1.35;  // frozen from the brute-force pre-pass
  for (double gamma : {-0.4, 0.0, 0.4}) {
    double lo = 1e18, hi = 0.0;
    for (int n = 31; n <= 501; n += 2) {
      GridFunction ind(n, 0.0);
      ind[0] = 1.0;
      double ratio = spectral::sobolev_norm(ind, SobolevIndex(gamma)) /
                     std::pow(static_cast<double>(n), gamma - 0.5);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      if (gamma == 0.0)
        out.require(std::abs(ratio - 1.0) <= 1e-12,
                    "gamma 0 not exactly n^{-1/2} at n=" + std::to_string(n));
    }
    out.require(lo >= 1.0 / C && hi <= C,
                "band violated at gamma=" + fmt(gamma) + ": [" + fmt(lo) + "," + fmt(hi) + "]");
    out.info("gamma " + fmt(gamma) + ": [" + fmt(lo) + ", " + fmt(hi) + "]");
  }
  return out;
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion4_product_rules() {
  Outcome out;
  struct Case {
    const char* name;
    double nu, nv, nout;
  };
  const Case cases[] = {
      {"direct-i (0.8,0.8->0.6)", 0.8, 0.8, 0.6},
      {"direct-ii (0.3,0.3->0.05)", 0.3, 0.3, 0.05},
      {"dual-i (-0.6,0.8->-0.8)", -0.6, 0.8, -0.8},
      {"dual-ii (-0.05,0.3->-0.3)", -0.05, 0.3, -0.3},
  };
  const std::vector<int> ns = {31, 63, 127, 255, 501};
  for (const Case& cs : cases) {
    rng::Xoshiro256pp gen(404);
    std::vector<double> ratios;
    for (int n : ns) {
      double worst = 0.0;
      for (int trial = 0; trial < 1000; ++trial) {
        double p = 1.5 * gen.uniform();
        SpectralCoeffs cu(n), cv(n);
        for (int m = 0; m < cu.mode_count(); ++m) {
          double w = std::pow(1.0 + m, -p);
          cu.a[static_cast<std::size_t>(m)] = gen.normal() * w;
          cv.a[static_cast<std::size_t>(m)] = gen.normal() * w;
          if (m > 0) {
            cu.b[static_cast<std::size_t>(m)] = gen.normal() * w;
            cv.b[static_cast<std::size_t>(m)] = gen.normal() * w;
          }
        }
        GridFunction u = spectral::synthesize(cu);
        GridFunction v = spectral::synthesize(cv);
        GridFunction uv(n);
        for (int j = 0; j < n; ++j) uv[j] = u[j] * v[j];
        double r = spectral::sobolev_norm(uv, SobolevIndex(cs.nout)) /
                   (spectral::sobolev_norm(cu, SobolevIndex(cs.nu)) *
                    spectral::sobolev_norm(cv, SobolevIndex(cs.nv)));
        worst = std::max(worst, r);
      }
      ratios.push_back(worst);
    }
    std::vector<double> xs(ns.begin(), ns.end());
    double slope = stats::fit_loglog(xs, ratios).slope;
    out.require(slope < 0.1, std::string(cs.name) + " slope " + fmt(slope));
    out.info(std::string(cs.name) + " slope " + fmt(slope));
  }
  return out;
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion5_poisson_oracle() {
  Outcome out;
  ReactionNetwork net = builtin_network("d-birth");
  const int n = 31, replicas = 10000;
  const double c = 2.0, T = 1.0;
  GridFunction u0(n, 0.0), v0(n, 0.0);
  std::vector<std::vector<double>> per_cell(static_cast<std::size_t>(n));
  for (auto& pc : per_cell) pc.reserve(replicas);
  for (int r = 0; r < replicas; ++r) {
    sim::SimConfig cfg;
    cfg.n = n;
    cfg.l = 10.0;
    cfg.T = T;
    cfg.sample_times = {0.0, T};
    cfg.seed = rng::Xoshiro256pp::substream(505, static_cast<std::uint64_t>(r)).next_u64();
    cfg.M = net.M();
    sim::Trajectory traj = sim::simulate(net, u0, v0, cfg);
    for (int j = 0; j < n; ++j)
      per_cell[static_cast<std::size_t>(j)].push_back(traj.samples.back().v[j]);
  }
  const double sigma_mean = std::sqrt(c * T / replicas);
  double worst_mean_dev = 0.0, worst_var_rel = 0.0;
  for (int j = 0; j < n; ++j) {
    double m = stats::mean(per_cell[static_cast<std::size_t>(j)]);
    double var = stats::variance(per_cell[static_cast<std::size_t>(j)]);
    worst_mean_dev = std::max(worst_mean_dev, std::abs(m - c * T));
    worst_var_rel = std::max(worst_var_rel, std::abs(var - c * T) / (c * T));
  }
  out.require(worst_mean_dev <= 3.0 * sigma_mean,
              "per-cell mean deviates " + fmt(worst_mean_dev) + " > 3 sigma = " +
                  fmt(3.0 * sigma_mean));
  out.require(worst_var_rel <= 0.10, "per-cell variance off by " + fmt(worst_var_rel));
  out.info("max |mean - 2| = " + fmt(worst_mean_dev) + " (3 sigma " + fmt(3 * sigma_mean) +
           "), max var rel dev = " + fmt(worst_var_rel));
  return out;
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion6_diffusion_mean_field() {
  Outcome out;
  ReactionNetwork net = builtin_network("pure-diffusion");
  const int n = 31, replicas = 200;
  const double l = 100.0, T = 0.25;
  GridFunction u0(n);
  for (int j = 0; j < n; ++j) u0[j] = 0.6 + 0.35 * std::cos(2.0 * kPi * j / n);
  GridFunction v0(n, 0.0);
  auto samples = sim::SimConfig::uniform_samples(T, 10);

  sim::SimConfig cfg0;
  cfg0.n = n;
  cfg0.l = l;
  cfg0.T = T;
  cfg0.sample_times = samples;
  cfg0.M = net.M();
  auto st = sim::init_state(net, u0, v0, cfg0);
  GridFunction u0r(n);
  for (int j = 0; j < n; ++j)
    u0r[j] = static_cast<double>(sim::view_of(*st).countsC[j]) / l;

  std::vector<GridFunction> mean_u(samples.size(), GridFunction(n, 0.0));
  for (int r = 0; r < replicas; ++r) {
    sim::SimConfig cfg = cfg0;
    cfg.seed = rng::Xoshiro256pp::substream(606, static_cast<std::uint64_t>(r)).next_u64();
    sim::Trajectory traj = sim::simulate(net, u0, v0, cfg);
    for (std::size_t k = 0; k < samples.size(); ++k)
      mean_u[k] = mean_u[k] + (1.0 / replicas) * traj.samples[k].u;
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k)
    worst = std::max(worst, linf_norm(mean_u[k] - spectral::heat_semigroup(u0r, samples[k])));
  out.require(worst <= 0.05, "sup error " + fmt(worst));
  out.info("sup_t ||mean u - T_n(t) u0||_inf = " + fmt(worst));
  return out;
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion7_compensator_audit() {
  Outcome out;
  for (const char* name : {"birth-death-C", "pure-diffusion"}) {
    harness::AuditReport rep = harness::compensator_study(builtin_network(name), 31, 100.0,
                                                          1000, 0.1, 10, 707);
    for (const harness::AuditRow& row : rep.rows) {
      out.require(row.pass, std::string(name) + " probe " + row.probe + " CI [" +
                                fmt(row.ci.lo) + "," + fmt(row.ci.hi) + "] misses 0");
      out.info(std::string(name) + "/" + row.probe + ": mean(S-G) = " + fmt(row.mean_diff) +
               " in [" + fmt(row.ci.lo) + "," + fmt(row.ci.hi) + "]");
    }
  }
  return out;
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion8_zd_decay() {
  Outcome out;
  harness::SlopeReport rep = harness::zd_decay_study(builtin_network("d-birth-death"),
                                                     {31, 63, 127, 255}, 200, 0.4, 1.0, 20, 808);
  out.require(rep.fit.slope <= -0.3, "slope " + fmt(rep.fit.slope) + " > -0.3");
  out.require(rep.slope_ci.hi < 0.0, "slope CI does not exclude 0");
  out.info("slope " + fmt(rep.fit.slope) + " (bound -0.8), CI [" + fmt(rep.slope_ci.lo) + "," +
           fmt(rep.slope_ci.hi) + "], R2 " + fmt(rep.fit.r2));
  return out;
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion9_yn_tails() {
  Outcome out;
  harness::TailReport rep =
      harness::yn_tail_study(builtin_network("birth-death-C"), 31, {50.0, 200.0, 800.0}, {0.1},
                             500, 0.2, 0.1, 10, 909);
  out.require(rep.monotone_inf, "sup-norm exceedance not monotone in l");
  out.require(rep.monotone_beta, "H^beta exceedance not monotone in l");
  std::string freq_inf = "freq_inf:", freq_beta = "freq_beta:";
  for (const harness::TailCell& cell : rep.cells) {
    freq_inf += " " + fmt(cell.freq_inf);
    freq_beta += " " + fmt(cell.freq_beta);
  }
  out.info(freq_inf + " | " + freq_beta + " over l = {50, 200, 800}");
  return out;
}

// ---------------------------------------------------------------- criterion 10

Outcome criterion10_limit_solver() {
  Outcome out;
  // exact heat eigenmode decay
  {
    ReactionNetwork net = builtin_network("pure-diffusion");
    const int m_ref = 31;
    SpectralCoeffs u0(m_ref);
    u0.a[1] = 1.0;
    GridFunction v0(m_ref, 0.0);
    pde::LimitSolution sol = pde::solve_limit(net, u0, v0, 0.1, 1e-3, m_ref, {0.0, 0.1});
    double expect = std::exp(-4.0 * kPi * kPi * 0.1);
    double err = std::abs(sol.u.back().a[1] - expect);
    out.require(err <= 1e-12, "eigenmode decay error " + fmt(err));
    out.info("eigenmode decay error " + fmt(err));
  }
  // Strang self-convergence order
  {
    ReactionNetwork net = builtin_network("coupled-gene");
    const int m_ref = 31;
    SpectralCoeffs u0(m_ref);
    u0.a[0] = 0.5;
    u0.a[1] = 0.15;
    u0.b[2] = 0.1;
    GridFunction v0(m_ref, 2.0);
    auto run = [&](double dt) {
      return spectral::synthesize(
          pde::solve_limit(net, u0, v0, 0.25, dt, m_ref, {0.0, 0.25}).u.back());
    };
    GridFunction u1 = run(2e-3), u2 = run(1e-3), u4 = run(5e-4);
    double order = std::log2(linf_norm(u1 - u2) / linf_norm(u2 - u4));
    out.require(std::abs(order - 2.0) <= 0.3, "observed order " + fmt(order));
    out.info("Strang order " + fmt(order));
  }
  // memory-form representation of v
  {
    ReactionNetwork net = builtin_network("coupled-gene");
    const int m_ref = 31;
    SpectralCoeffs u0(m_ref);
    u0.a[0] = 0.5;
    u0.a[1] = 0.2;
    GridFunction v0(m_ref, 2.0);
    pde::LimitSolution sol =
        pde::solve_limit(net, u0, v0, 1.0, 1e-4, m_ref, {0.0, 1.0}, true);
    std::vector<GridFunction> vmem = pde::memory_form_v(net, sol, v0);
    double err = linf_norm(vmem.back() - sol.v.back());
    out.require(err <= 1e-6, "memory-form gap " + fmt(err));
    out.info("memory-form gap " + fmt(err));
  }
  return out;
}

// ---------------------------------------------------------------- criterion 11

Outcome criterion11_lattice_to_continuum() {
  Outcome out;
  ReactionNetwork net = builtin_network("gene-toggle");
  const double T = 0.25, dt = 2e-4, beta = 0.2;
  const int m_ref = 511;

  // smooth analytic discrete-scale driver, projected exactly per lattice
  auto driver_for = [&](int n) {
    pde::DrivingPath vp;
    const int steps = 256;
    for (int k = 0; k <= steps; ++k) {
      double t = T * k / steps;
      SpectralCoeffs c(n);
      c.a[0] = 1.0;
      c.a[1] = 0.5 * std::exp(-t) / std::numbers::sqrt2;
      vp.times.push_back(t);
      vp.values.push_back(spectral::project_reference(c, n));
    }
    return vp;
  };

  SpectralCoeffs u0c(m_ref);
  u0c.a[0] = 0.6;
  u0c.a[1] = 0.2;
  u0c.b[2] = 0.1;

  pde::LatticeSolution ref = pde::solve_lattice_pde(
      net, spectral::project_reference(u0c, m_ref), driver_for(m_ref), T, dt, {0.0, T});

  std::string errs = "errors:";
  double prev = 1e18;
  bool decreasing = true;
  for (int n : {31, 63, 127, 255}) {
    pde::LatticeSolution sol = pde::solve_lattice_pde(
        net, spectral::project_reference(u0c, n), driver_for(n), T, dt, {0.0, T});
    double err = spectral::sobolev_norm(sol.w.back() - spectral::project_step(ref.w.back(), n),
                                        SobolevIndex(beta));
    errs += " " + fmt(err);
    if (err >= prev) decreasing = false;
    prev = err;
  }
  out.require(decreasing, "H^beta gap not strictly decreasing (" + errs + ")");
  out.info(errs + " over n = {31, 63, 127, 255}");
  return out;
}

// ---------------------------------------------------------------- criterion 12

Outcome criterion12_lln() {
  Outcome out;
  harness::ExperimentPlan plan;
  plan.network = "coupled-gene";
  plan.alpha = 0.1;
  plan.beta = 0.2;
  plan.scaling_c = 1.0;
  plan.scaling_delta = 1.0;
  plan.T = 0.2;
  plan.sample_count = 20;
  plan.m_ref = 511;
  plan.dt = 1e-4;
  plan.master_seed = 1212;
  for (int n : {31, 63, 127}) plan.grid.push_back({n, 0.0, 100});

  harness::ErrorReport rep = harness::run_lln(plan);
  auto check_metric = [&](const char* name,
                          const std::function<double(const harness::LlnRow&)>& get) {
    std::string meds = std::string(name) + ":";
    bool decreasing = true;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      meds += " " + fmt(get(rep.rows[i]));
      if (i > 0 && get(rep.rows[i]) >= get(rep.rows[i - 1])) decreasing = false;
    }
    double ratio = get(rep.rows.back()) / get(rep.rows.front());
    out.require(decreasing, std::string(name) + " medians not strictly decreasing");
    out.require(ratio <= 0.5,
                std::string(name) + " final/initial = " + fmt(ratio) + " > 0.5");
    out.info(meds + " (ratio " + fmt(ratio) + ")");
  };
  check_metric("u_beta", [](const harness::LlnRow& r) { return r.err_u_beta.median; });
  check_metric("u_inf", [](const harness::LlnRow& r) { return r.err_u_inf.median; });
  check_metric("v_alpha", [](const harness::LlnRow& r) { return r.err_v_alpha.median; });
  return out;
}

// ---------------------------------------------------------------- criterion 13

Outcome criterion13_determinism() {
  Outcome out;
  namespace fs = std::filesystem;
  fs::path tmp = fs::temp_directory_path() / "meso_acceptance_det";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };

  harness::ExperimentPlan plan;
  plan.network = "coupled-gene";
  plan.grid = {{9, 60.0, 6}, {15, 110.0, 6}};
  plan.T = 0.05;
  plan.sample_count = 4;
  plan.m_ref = 63;
  plan.dt = 1e-3;
  plan.master_seed = 5;
  {
    std::ofstream o(tmp / "plan.json");
    o << plan.to_json();
  }
  int rc1 = cli::dispatch({"converge", "--plan", (tmp / "plan.json").string(), "--out",
                           (tmp / "c1").string()});
  int rc2 = cli::dispatch({"converge", "--plan", (tmp / "plan.json").string(), "--out",
                           (tmp / "c2").string()});
  out.require(rc1 == 0 && rc2 == 0, "converge runs failed");
  for (const char* f : {"report.json", "report.csv", "plots/medians.csv"})
    out.require(slurp(tmp / "c1" / f) == slurp(tmp / "c2" / f),
                std::string("converge output differs: ") + f);

  int rs1 = cli::dispatch({"simulate", "--model", "coupled-gene", "--n", "15", "--l", "80",
                           "--T", "0.1", "--samples", "5", "--seed", "99", "--log-events",
                           "--out", (tmp / "s1").string()});
  int rs2 = cli::dispatch({"simulate", "--model", "coupled-gene", "--n", "15", "--l", "80",
                           "--T", "0.1", "--samples", "5", "--seed", "99", "--log-events",
                           "--out", (tmp / "s2").string()});
  out.require(rs1 == 0 && rs2 == 0, "simulate runs failed");
  for (const char* f : {"trajectory.bin", "events.bin", "summary.json"})
    out.require(slurp(tmp / "s1" / f) == slurp(tmp / "s2" / f),
                std::string("simulate output differs: ") + f);
  fs::remove_all(tmp);
  out.info("converge and simulate reruns byte-identical");
  return out;
}

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  const Criterion criteria[] = {
      {1, "spectral exactness (eigenrelation 1e-10, roundtrip 1e-12)", 1.0,
       criterion1_spectral_exactness},
      {2, "lattice/continuum eigenvalue ratio in [4/pi^2, 1] up to n=1001", 1.0,
       criterion2_eigenvalue_equivalence},
      {3, "indicator norm band across n in [31, 501]", 5.0, criterion3_indicator_norms},
      {4, "product-rule constants are n-uniform (slope < 0.1)", 120.0,
       criterion4_product_rules},
      {5, "Poisson oracle for constant discrete births", 60.0, criterion5_poisson_oracle},
      {6, "pure-diffusion ensemble mean follows the heat flow", 120.0,
       criterion6_diffusion_mean_field},
      {7, "compensator audit CIs cover zero", 300.0, criterion7_compensator_audit},
      {8, "discrete martingale decay slope", 1800.0, criterion8_zd_decay},
      {9, "stochastic convolution tails fall with l", 1200.0, criterion9_yn_tails},
      {10, "limit solver: eigenmode, order 2, memory form", 60.0, criterion10_limit_solver},
      {11, "lattice PDE approaches the continuum solution", 120.0,
       criterion11_lattice_to_continuum},
      {12, "law of large numbers error decay", 2700.0, criterion12_lln},
      {13, "byte-identical reruns", 600.0, criterion13_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = secs <= c.limit_seconds;
    bool pass = out.ok && in_time;
    std::printf("[%s] criterion %2d: %s  (%.1fs/%gs)%s%s\n", pass ? "PASS" : "FAIL", c.id,
                c.title, secs, c.limit_seconds, out.detail.empty() ? "" : " -- ",
                out.detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
