#pragma once

// Ensemble experiment driver: law-of-large-numbers error study against the
// deterministic reference, discrete-martingale decay rates, stochastic
// convolution tail frequencies, the inequality probes, and the compensator
// study. Reports are pure functions of (plan, master seed): replicas draw
// independent RNG substreams and aggregation is ordered by replica index.

#include <cstdint>
#include <string>
#include <vector>

#include "meso/grid.hpp"
#include "meso/limit.hpp"
#include "meso/reaction.hpp"
#include "meso/simulator.hpp"
#include "meso/stats.hpp"

namespace meso::harness {

struct GridPoint {
  int n = 31;
  double l = 50.0;
  int replicas = 100;
};

struct ExperimentPlan {
  std::string network = "coupled-gene";  // builtin name or model file path
  std::vector<GridPoint> grid;
  // scaling rule l(n) = ceil(c n^{2 beta} log(n)^{1+delta}); used when the
  // grid lists n/replicas only (l = 0)
  double scaling_c = 1.0;
  double scaling_delta = 1.0;
  double alpha = 0.1;   // discrete-scale error norm index (negative side)
  double beta = 0.2;    // continuous-scale error norm index
  double T = 0.25;
  int sample_count = 25;
  std::uint64_t master_seed = 1;
  int m_ref = 511;
  double dt = 1e-4;
  int jobs = 1;
  // initial data: u0 as low-mode coefficients, v0 a constant integer count
  std::vector<double> u0_cos = {0.5, 0.1767766952966369};  // a_0, a_1, ...
  std::vector<double> u0_sin = {0.0, 0.0, 0.0707106781186547};
  double v0_const = 2.0;

  std::string validate() const;  // empty string when well-formed
  double scaled_l(int n) const;

  std::string to_json() const;
  static ExperimentPlan from_json(const std::string& text);

  SpectralCoeffs u0_coeffs(int resolution) const;
};

struct MetricSummary {
  double median = 0.0;
  double mean = 0.0;
  double p90 = 0.0;
  stats::Interval median_ci;  // bootstrap
};

struct LlnRow {
  int n = 0;
  double l = 0.0;
  int replicas = 0;
  int aborted = 0;
  double trunc_frequency = 0.0;
  MetricSummary err_u_beta;  // sup_t || u^n - P_n u ||_{H^beta}
  MetricSummary err_u_inf;   // sup_t max_j | u^n_j - (P_n u)_j |
  MetricSummary err_v_alpha; // sup_t || v^n - P_n v ||_{H^{-alpha}}
};

struct ErrorReport {
  std::vector<LlnRow> rows;
  stats::LineFit slope_u_beta, slope_u_inf, slope_v_alpha;  // log median vs log n
  stats::Interval slope_u_beta_ci, slope_u_inf_ci, slope_v_alpha_ci;
  // per-replica sup errors, one vector per grid point (plot/bootstrap fodder)
  std::vector<std::vector<double>> raw_u_beta, raw_u_inf, raw_v_alpha;
};

ErrorReport run_lln(const ExperimentPlan& plan);

// -- discrete-martingale decay -------------------------------------------------

struct SlopeReport {
  double alpha_tilde = 0.0;
  std::vector<int> ns;
  std::vector<double> mean_sq;  // E sup_t ||Z_D||^2_{H^{-alpha~}} per n
  stats::LineFit fit;           // log mean vs log n
  stats::Interval slope_ci;
  bool degenerate = false;      // all-zero martingale (no discrete reactions)
  std::vector<std::vector<double>> raw;  // per-replica sup^2 per n

  /// Upper-bound semantics: observed decay at least as fast as -2 alpha~
  /// within the slack, with a CI excluding zero.
  bool passes(double slack = 0.5) const {
    return degenerate ||
           (fit.slope <= -2.0 * alpha_tilde + slack && slope_ci.hi < 0.0);
  }
};

SlopeReport zd_decay_study(const model::ReactionNetwork& net, const std::vector<int>& ns,
                           int replicas, double alpha_tilde, double T, int sample_count,
                           std::uint64_t master_seed, int jobs = 1);

// -- stochastic convolution tails -----------------------------------------------

struct TailCell {
  double l = 0.0;
  double eps = 0.0;
  double freq_inf = 0.0;   // empirical P(sup_t ||Y||_inf > eps)
  double freq_beta = 0.0;  // same in H^beta
  stats::Interval ci_inf, ci_beta;  // bootstrap over replicas
};

struct TailReport {
  int n = 0;
  double beta = 0.0;
  std::vector<TailCell> cells;  // ordered by (eps, l)
  bool monotone_inf = false;    // non-increasing in l for every eps
  bool monotone_beta = false;
};

TailReport yn_tail_study(const model::ReactionNetwork& net, int n, const std::vector<double>& ls,
                         const std::vector<double>& epsilons, int replicas, double beta, double T,
                         int sample_count, std::uint64_t master_seed, int jobs = 1);

// -- inequality probes ------------------------------------------------------------

struct ProbeResult {
  std::string name;
  std::vector<int> ns;
  std::vector<double> max_ratio;  // largest observed ratio per n
  double slope = 0.0;             // log max_ratio vs log n (0 when flat/degenerate)
  bool pass = false;
  std::string note;
};

struct ProbeReport {
  std::vector<ProbeResult> results;
  bool all_pass() const {
    for (const auto& r : results)
      if (!r.pass) return false;
    return true;
  }
};

ProbeReport inequality_probes(const std::vector<int>& ns, int trials, std::uint64_t seed);

// -- compensator study ---------------------------------------------------------------

struct AuditRow {
  std::string probe;
  double mean_diff = 0.0;  // ensemble mean of S(T) - G(T)
  stats::Interval ci;
  double mean_S = 0.0, mean_G = 0.0;
  bool pass = false;  // CI contains 0
};

struct AuditReport {
  std::string network;
  std::vector<AuditRow> rows;
  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }
};

/// Probe set: constant 1, the first cosine eigenmode, and the scaled
/// indicator n 1_{I_0}.
AuditReport compensator_study(const model::ReactionNetwork& net, int n, double l, int replicas,
                              double T, int sample_count, std::uint64_t master_seed,
                              int jobs = 1);

// -- shared helpers ------------------------------------------------------------------

/// Deterministic replica-indexed parallel map: body(i) for i in [0, count),
/// executed on up to `jobs` threads; results land in caller-owned slots.
void parallel_replicas(int count, int jobs, const std::function<void(int)>& body);

/// Round a real grid function to integer-valued counts (for v0 drivers).
GridFunction integer_grid(const GridFunction& g);

}  // namespace meso::harness
