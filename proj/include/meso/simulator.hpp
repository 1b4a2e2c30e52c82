#pragma once

// Statistically exact event-driven simulation of the two-scale jump process:
// per-cell reaction channels on both scales plus nearest-neighbour diffusion
// of the abundant species (left/right clocks, each at rate l n^2 u_j).
// Jumps freeze at the truncation time tau (first exit of ||u||_inf or
// ||v||_{H^{-alpha}} above M+1); afterwards the state follows the drift ODE,
// integrated with RK4 at a CFL-safe step.
//
// Observers see every event with the pre-event state and exact elapsed
// exposure, which is what the exact compensator accounting, the stochastic
// convolution and the event log are built from.

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "meso/grid.hpp"
#include "meso/reaction.hpp"
#include "meso/rng.hpp"
#include "meso/sum_tree.hpp"

namespace meso::sim {

enum class SimMode { Exact, TauLeap };

struct SimConfig {
  int n = 5;
  double l = 100.0;
  double T = 1.0;
  std::vector<double> sample_times;  // sorted, in [0, T]; 0 is implied
  std::uint64_t seed = 0;
  double M = 1.0;                    // truncation threshold (from the network)
  double alpha_trunc = 0.25;         // tau norm index, in (0, 1/2)
  int trunc_check_every = 0;         // events between H^{-alpha} checks; 0 = n
  SimMode mode = SimMode::Exact;
  double tau_leap_dt = 1e-4;

  static std::vector<double> uniform_samples(double T, int count);
};

/// Uniform read view of the live state, valid in both the jump phase
/// (integer counts) and the post-truncation deterministic phase.
struct StateView {
  double t = 0.0;
  int n = 0;
  double l = 1.0;
  const std::int64_t* countsC = nullptr;
  const std::int64_t* countsD = nullptr;
  const double* u_real = nullptr;  // non-null once deterministic
  const double* v_real = nullptr;

  double u(int j) const { return u_real ? u_real[j] : static_cast<double>(countsC[j]) / l; }
  double v(int j) const { return v_real ? v_real[j] : static_cast<double>(countsD[j]); }
};

struct AppliedEvent {
  double t = 0.0;
  std::uint32_t channel = 0;
  int cell = 0;
  int slot = 0;       // < R: reaction index; == R: left diffusion; == R+1: right
  int to_cell = 0;    // diffusion target; == cell otherwise
  bool is_diffusion = false;
  model::Species species = model::Species::C;
  int gamma = 0;      // counts change in `cell` (diffusion: -1 here, +1 in to_cell)
};

class EventObserver {
 public:
  virtual ~EventObserver() = default;
  virtual void on_init(const StateView&) {}
  /// `pre` is the state before applying `ev`; `ev.t - pre.t` is the exact
  /// exposure of the pre-event rates.
  virtual void on_event(const StateView& pre, const AppliedEvent& ev) { (void)pre; (void)ev; }
  virtual void on_sample(const StateView& state) { (void)state; }
  virtual void on_truncation(const StateView& state) { (void)state; }
};

struct TrajectorySample {
  double t = 0.0;
  GridFunction u, v;
  GridFunction int_rc;   // exact per-cell integral of R_C along the path
  GridFunction int_rd;   // same for R_D
  GridFunction int_lap;  // integral of the discrete Laplacian of u
};

struct Trajectory {
  int n = 0;
  double l = 0.0;
  double T = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t network_hash = 0;
  std::vector<std::int64_t> counts0C, counts0D;
  GridFunction u0, v0;
  std::vector<TrajectorySample> samples;
  std::optional<double> truncated_at;
  double trunc_window = 0.0;  // detection lag bound of the lazy norm check
  std::uint64_t event_count = 0;
  bool approximate = false;   // set by the tau-leap mode
};

struct EventRecord {
  double t;
  std::uint32_t channel;
};

class SimState;  // live state, defined in the implementation

struct SimStateDeleter {
  void operator()(SimState* p) const;
};
using SimStatePtr = std::unique_ptr<SimState, SimStateDeleter>;

/// Initial counts: countsC = round(l u0) (half away from zero), countsD = v0.
/// Requires u0 >= 0 with ||u0||_inf < M, v0 integer-valued >= 0, l >= |gamma|.
SimStatePtr init_state(const model::ReactionNetwork& net, const GridFunction& u0,
                       const GridFunction& v0, const SimConfig& cfg);

/// One event of the direct method on an externally held state (exposed for
/// the fine-grained tests; simulate() drives the same machinery).
AppliedEvent step(SimState& state, const model::ReactionNetwork& net, const SimConfig& cfg,
                  rng::Xoshiro256pp& gen);

Trajectory simulate(const model::ReactionNetwork& net, const GridFunction& u0,
                    const GridFunction& v0, const SimConfig& cfg,
                    std::span<EventObserver* const> observers = {});

/// Re-drives observers through a recorded event log (and the trajectory's
/// sample grid), reconstructing states from the stored initial counts.
void replay(const model::ReactionNetwork& net, const Trajectory& traj, const SimConfig& cfg,
            std::span<const EventRecord> log, std::span<EventObserver* const> observers);

// -- event log ------------------------------------------------------------

class MemoryEventLog : public EventObserver {
 public:
  void on_event(const StateView&, const AppliedEvent& ev) override {
    events.push_back({ev.t, ev.channel});
  }
  std::vector<EventRecord> events;
};

// -- martingale extraction --------------------------------------------------

struct MartingalePaths {
  std::vector<double> times;
  std::vector<GridFunction> zc;  // u(t) - u(0) - int R_C - int Lap u
  std::vector<GridFunction> zd;  // v(t) - v(0) - int R_D
};

MartingalePaths extract_martingales(const Trajectory& traj);

// -- stochastic convolution --------------------------------------------------

/// Streaming accumulator for Y_t = int_0^t T(t-s) dZ_C(s ^ tau), maintained
/// per spectral mode with closed-form exponential integrals of the
/// piecewise-constant compensator; optionally also accumulates the mild
/// drift int_0^t T(t-s) R_C ds. Exact at event resolution before tau.
class ConvolutionAccumulator : public EventObserver {
 public:
  ConvolutionAccumulator(const model::ReactionNetwork& net, int n, double l, int n_modes = 0,
                         bool with_mild_drift = false);
  ~ConvolutionAccumulator() override;

  void on_init(const StateView&) override;
  void on_event(const StateView& pre, const AppliedEvent& ev) override;
  void on_sample(const StateView& state) override;
  void on_truncation(const StateView& state) override;

  const std::vector<double>& times() const;
  /// Y at sample k as coefficients / grid values.
  SpectralCoeffs y_coeffs(std::size_t k) const;
  GridFunction y_values(std::size_t k) const;
  /// Mild drift at sample k (requires with_mild_drift).
  SpectralCoeffs mild_drift_coeffs(std::size_t k) const;

  /// sup over recorded samples of ||Y||_inf and ||Y||_{H^beta}.
  double sup_linf() const;
  double sup_sobolev(double beta) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ConvolutionPath {
  std::vector<double> times;
  std::vector<SpectralCoeffs> y;
  std::vector<SpectralCoeffs> mild_drift;  // empty unless requested
};

ConvolutionPath stochastic_convolution(const model::ReactionNetwork& net, const Trajectory& traj,
                                       const SimConfig& cfg, std::span<const EventRecord> log,
                                       int n_modes = 0, bool with_mild_drift = false);

// -- compensator audit --------------------------------------------------------

/// Tracks S(t) = sum of squared jumps of <Z_C, phi> and its predictable
/// compensator G(t) = (1/(n l)) int <u, (grad+ phi)^2 + (grad- phi)^2>
/// + <R~_C(u, v), phi^2> ds, both exactly event-wise and both stopped at tau.
class CompensatorAuditor : public EventObserver {
 public:
  CompensatorAuditor(const model::ReactionNetwork& net, int n, double l, GridFunction probe);
  ~CompensatorAuditor() override;

  void on_init(const StateView&) override;
  void on_event(const StateView& pre, const AppliedEvent& ev) override;
  void on_sample(const StateView& state) override;
  void on_truncation(const StateView& state) override;

  double S() const;
  double G() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CompensatorAuditResult {
  double S = 0.0;
  double G = 0.0;
};

CompensatorAuditResult compensator_audit(const model::ReactionNetwork& net, const Trajectory& traj,
                                         const SimConfig& cfg, std::span<const EventRecord> log,
                                         const GridFunction& probe);

// -- test hooks ---------------------------------------------------------------

/// Freshly evaluated rate of one channel from raw counts (audit oracle).
double channel_rate(const model::ReactionNetwork& net, int n, double l,
                    std::int64_t countsC_j, std::int64_t countsD_j, int slot);

/// Max |tree leaf - fresh rate| over all channels of a live state.
double rate_tree_audit(const SimState& state, const model::ReactionNetwork& net);

const StateView& view_of(const SimState& state);

}  // namespace meso::sim
