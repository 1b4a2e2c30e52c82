#include "meso/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "meso/spectral.hpp"

namespace meso::sim {

using model::ReactionNetwork;
using model::Species;

std::vector<double> SimConfig::uniform_samples(double T, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count) + 1);
  for (int k = 0; k < count; ++k) out.push_back(T * static_cast<double>(k) / count);
  out.push_back(T);  // exact endpoint
  return out;
}

namespace {

struct KahanCell {
  double sum = 0.0, comp = 0.0;
  void add(double x) {
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

constexpr double kRateFloor = -1e-9;  // tolerance for fp noise in valid rates

}  // namespace

/// Live state of one simulation: integer counts, the rate tree, and the
/// exact lazily-flushed per-cell integrals of R_C, R_D and u.
class SimState {
 public:
  SimState(const ReactionNetwork& net, const GridFunction& u0, const GridFunction& v0,
           const SimConfig& cfg)
      : net_(&net), n_(cfg.n), l_(cfg.l), cpc_(static_cast<int>(net.reactions().size()) + 2) {
    countsC_.resize(static_cast<std::size_t>(n_));
    countsD_.resize(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j) {
      // round half away from zero
      countsC_[static_cast<std::size_t>(j)] =
          static_cast<std::int64_t>(std::llround(l_ * u0[j]));
      double vr = std::round(v0[j]);
      countsD_[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(vr);
    }
    int_rc_.resize(static_cast<std::size_t>(n_));
    int_rd_.resize(static_cast<std::size_t>(n_));
    int_u_.resize(static_cast<std::size_t>(n_));
    drift_rc_.resize(static_cast<std::size_t>(n_));
    drift_rd_.resize(static_cast<std::size_t>(n_));
    last_t_.resize(static_cast<std::size_t>(n_), 0.0);
    tree_.reset(static_cast<std::size_t>(n_) * static_cast<std::size_t>(cpc_));
    rate_buf_.resize(static_cast<std::size_t>(cpc_));
    for (const auto& r : net.reactions()) {
      gamma_d_.push_back(static_cast<double>(r.gamma));
      is_c_.push_back(r.species == Species::C);
    }
    for (int j = 0; j < n_; ++j) refresh_cell(j);
    max_counts_ = *std::max_element(countsC_.begin(), countsC_.end());
    init_vnorm(cfg.alpha_trunc);
    sync_view();
  }

  int n() const { return n_; }
  double l() const { return l_; }
  int channels_per_cell() const { return cpc_; }
  double t() const { return t_; }
  std::uint64_t event_count() const { return event_count_; }
  const RateTree& tree() const { return tree_; }
  bool deterministic_phase() const { return !u_real_.empty(); }
  std::optional<double> truncated_at() const { return truncated_at_; }
  double trunc_window() const { return trunc_window_; }

  double u(int j) const {
    return u_real_.empty() ? static_cast<double>(countsC_[static_cast<std::size_t>(j)]) / l_
                           : u_real_[static_cast<std::size_t>(j)];
  }
  double v(int j) const {
    return v_real_.empty() ? static_cast<double>(countsD_[static_cast<std::size_t>(j)])
                           : v_real_[static_cast<std::size_t>(j)];
  }

  const StateView& view() const { return view_; }

  // -- jump phase -------------------------------------------------------

  double total_rate() const { return tree_.total(); }

  AppliedEvent select_event(double at_time, double uniform_draw) {
    AppliedEvent ev;
    ev.t = at_time;
    std::size_t ch = tree_.find(uniform_draw * tree_.total());
    ev.channel = static_cast<std::uint32_t>(ch);
    decode(static_cast<std::uint32_t>(ch), ev);
    return ev;
  }

  void decode(std::uint32_t channel, AppliedEvent& ev) const {
    int cell = static_cast<int>(channel) / cpc_;
    int slot = static_cast<int>(channel) % cpc_;
    ev.cell = cell;
    ev.slot = slot;
    const int nreact = cpc_ - 2;
    if (slot < nreact) {
      const model::Reaction& r = net_->reactions()[static_cast<std::size_t>(slot)];
      ev.is_diffusion = false;
      ev.species = r.species;
      ev.gamma = r.gamma;
      ev.to_cell = cell;
    } else {
      ev.is_diffusion = true;
      ev.species = Species::C;
      ev.gamma = -1;
      ev.to_cell = (slot == nreact) ? (cell + n_ - 1) % n_ : (cell + 1) % n_;
    }
  }

  /// Applies `ev` at time ev.t: flushes the exact integrals of the touched
  /// cells, updates counts and the affected channels. Throws on negative
  /// counts (model or bookkeeping bug).
  void apply(const AppliedEvent& ev) {
    flush_cell(ev.cell, ev.t);
    if (ev.is_diffusion) {
      flush_cell(ev.to_cell, ev.t);
      auto& from = countsC_[static_cast<std::size_t>(ev.cell)];
      auto& to = countsC_[static_cast<std::size_t>(ev.to_cell)];
      from -= 1;
      to += 1;
      if (from < 0) fail_negative(ev);
      refresh_cell(ev.cell);
      refresh_cell(ev.to_cell);
      track_max(to);
      if (from + 1 == max_counts_) rescan_max();
    } else if (ev.species == Species::C) {
      auto& c = countsC_[static_cast<std::size_t>(ev.cell)];
      std::int64_t before = c;
      c += ev.gamma;
      if (c < 0) fail_negative(ev);
      refresh_cell(ev.cell);
      track_max(c);
      if (ev.gamma < 0 && before == max_counts_) rescan_max();
    } else {
      auto& c = countsD_[static_cast<std::size_t>(ev.cell)];
      c += ev.gamma;
      if (c < 0) fail_negative(ev);
      refresh_cell(ev.cell);
      bump_vnorm(ev.cell, static_cast<double>(ev.gamma));
    }
    t_ = ev.t;
    ++event_count_;
    sync_view();
  }

  /// ||u||_inf > M + 1, checked from the tracked max (exact).
  bool sup_exceeds(double threshold) const {
    return static_cast<double>(max_counts_) > threshold * l_;
  }

  /// ||v||_{H^{-alpha}} maintained incrementally: v moves only on the rare
  /// discrete-scale events, so the coefficient updates are cheap and the
  /// lazy check is O(1). Refreshed exactly at sample times.
  double v_neg_norm() const { return std::sqrt(std::max(0.0, vnorm2_)); }

  void refresh_vnorm() {
    GridFunction vg(n_);
    for (int j = 0; j < n_; ++j) vg[j] = v(j);
    SpectralCoeffs c = spectral::analyze(vg);
    KahanCell acc;
    const int mc = c.mode_count();
    for (int m = 0; m < mc; ++m) {
      auto mm = static_cast<std::size_t>(m);
      va_[mm] = c.a[mm];
      vb_[mm] = c.b[mm];
      acc.add(wneg_[mm] * (va_[mm] * va_[mm] + vb_[mm] * vb_[mm]));
    }
    vnorm2_ = acc.sum;
  }

  void mark_truncated(double at, double window) {
    truncated_at_ = at;
    trunc_window_ = window;
    flush_all(at);
    // switch to the real-valued representation for the drift flow
    u_real_.resize(static_cast<std::size_t>(n_));
    v_real_.resize(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j) {
      u_real_[static_cast<std::size_t>(j)] =
          static_cast<double>(countsC_[static_cast<std::size_t>(j)]) / l_;
      v_real_[static_cast<std::size_t>(j)] = static_cast<double>(countsD_[static_cast<std::size_t>(j)]);
    }
    sync_view();
  }

  /// Post-truncation deterministic flow du/dt = Lap_n u + R_C, dv/dt = R_D,
  /// advanced to `target` with RK4 at a CFL-safe step. The drift integrals
  /// are carried as extra components of the same RK4 system, so the
  /// martingale residual stays identically zero on this segment.
  void integrate_deterministic(double target) {
    const double dt_max = 1.0 / (4.0 * static_cast<double>(n_) * static_cast<double>(n_));
    const std::size_t nn = static_cast<std::size_t>(n_);
    // state vector: u, v, int_rc, int_rd, int_u
    std::vector<double> y(5 * nn), k1(5 * nn), k2(5 * nn), k3(5 * nn), k4(5 * nn), tmp(5 * nn);
    for (std::size_t j = 0; j < nn; ++j) {
      y[j] = u_real_[j];
      y[nn + j] = v_real_[j];
      y[2 * nn + j] = int_rc_[j].sum;
      y[3 * nn + j] = int_rd_[j].sum;
      y[4 * nn + j] = int_u_[j].sum;
    }
    auto deriv = [&](const std::vector<double>& s, std::vector<double>& out) {
      const double n2 = static_cast<double>(n_) * static_cast<double>(n_);
      for (std::size_t j = 0; j < nn; ++j) {
        std::size_t jm = (j + nn - 1) % nn, jp = (j + 1) % nn;
        double lap = n2 * (s[jp] - 2.0 * s[j] + s[jm]);
        double rc = net_->drift_C(s[j], s[nn + j]);
        double rd = net_->drift_D(s[j], s[nn + j]);
        out[j] = lap + rc;
        out[nn + j] = rd;
        out[2 * nn + j] = rc;
        out[3 * nn + j] = rd;
        out[4 * nn + j] = s[j];
      }
    };
    double t = t_;
    while (t < target - 1e-15 * std::max(1.0, target)) {
      double dt = std::min(dt_max, target - t);
      deriv(y, k1);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
      deriv(tmp, k2);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
      deriv(tmp, k3);
      for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + dt * k3[i];
      deriv(tmp, k4);
      for (std::size_t i = 0; i < y.size(); ++i)
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      t += dt;
    }
    for (std::size_t j = 0; j < nn; ++j) {
      u_real_[j] = y[j];
      v_real_[j] = y[nn + j];
      int_rc_[j].sum = y[2 * nn + j];
      int_rd_[j].sum = y[3 * nn + j];
      int_u_[j].sum = y[4 * nn + j];
      last_t_[j] = target;
    }
    t_ = target;
    sync_view();
  }

  /// Advance time with no event (absorbing state or sampling boundary).
  void advance_time(double to) {
    t_ = to;
    sync_view();
  }

  void flush_all(double to) {
    for (int j = 0; j < n_; ++j) flush_cell(j, to);
  }

  TrajectorySample snapshot(double at) {
    if (!deterministic_phase()) flush_all(at);
    TrajectorySample s;
    s.t = at;
    s.u = GridFunction(n_);
    s.v = GridFunction(n_);
    s.int_rc = GridFunction(n_);
    s.int_rd = GridFunction(n_);
    GridFunction int_u(n_);
    for (int j = 0; j < n_; ++j) {
      s.u[j] = u(j);
      s.v[j] = v(j);
      s.int_rc[j] = int_rc_[static_cast<std::size_t>(j)].sum;
      s.int_rd[j] = int_rd_[static_cast<std::size_t>(j)].sum;
      int_u[j] = int_u_[static_cast<std::size_t>(j)].sum;
    }
    s.int_lap = spectral::discrete_laplacian(int_u);
    return s;
  }

  const std::vector<std::int64_t>& countsC() const { return countsC_; }
  const std::vector<std::int64_t>& countsD() const { return countsD_; }

  void assert_population_bound() const {
    if (deterministic_phase()) return;
    double bound = (net_->M() + 2.0) * l_;
    if (static_cast<double>(max_counts_) >= bound + 1e-9 * l_) {
      std::ostringstream os;
      os << "population bound violated: max u = "
         << static_cast<double>(max_counts_) / l_ << " >= M + 2 = " << net_->M() + 2.0;
      throw std::logic_error(os.str());
    }
  }

 private:
  void sync_view() {
    view_.t = t_;
    view_.n = n_;
    view_.l = l_;
    view_.countsC = countsC_.data();
    view_.countsD = countsD_.data();
    view_.u_real = u_real_.empty() ? nullptr : u_real_.data();
    view_.v_real = v_real_.empty() ? nullptr : v_real_.data();
  }

  void fail_negative(const AppliedEvent& ev) const {
    std::ostringstream os;
    os << "negative count after event at t = " << ev.t << ", cell " << ev.cell << ", slot "
       << ev.slot;
    throw std::logic_error(os.str());
  }

  void track_max(std::int64_t c) {
    if (c > max_counts_) max_counts_ = c;
  }
  void rescan_max() {
    max_counts_ = *std::max_element(countsC_.begin(), countsC_.end());
  }

  void init_vnorm(double alpha) {
    const int mc = (n_ + 1) / 2;
    wneg_.resize(static_cast<std::size_t>(mc));
    for (int m = 0; m < mc; ++m)
      wneg_[static_cast<std::size_t>(m)] =
          std::pow(1.0 + spectral::eigenvalue(m, n_), -alpha);
    va_.assign(static_cast<std::size_t>(mc), 0.0);
    vb_.assign(static_cast<std::size_t>(mc), 0.0);
    tt_ = &spectral::trig_table(n_);
    refresh_vnorm();
  }

  void bump_vnorm(int cell, double dv) {
    const int mc = (n_ + 1) / 2;
    const double base = dv / n_;
    const double s2 = std::numbers::sqrt2;
    // mode 0
    vnorm2_ += wneg_[0] * (2.0 * va_[0] * base + base * base);
    va_[0] += base;
    int k = 0;  // (m * cell) mod n, stepped exactly
    for (int m = 1; m < mc; ++m) {
      k += cell;
      if (k >= n_) k -= n_;
      auto mm = static_cast<std::size_t>(m);
      double da = s2 * base * tt_->c[static_cast<std::size_t>(k)];
      double db = s2 * base * tt_->s[static_cast<std::size_t>(k)];
      vnorm2_ += wneg_[mm] *
                 (2.0 * va_[mm] * da + da * da + 2.0 * vb_[mm] * db + db * db);
      va_[mm] += da;
      vb_[mm] += db;
    }
  }

  void flush_cell(int j, double to) {
    auto jj = static_cast<std::size_t>(j);
    double dt = to - last_t_[jj];
    if (dt != 0.0) {
      int_rc_[jj].add(drift_rc_[jj] * dt);
      int_rd_[jj].add(drift_rd_[jj] * dt);
      int_u_[jj].add(u(j) * dt);
      last_t_[jj] = to;
    }
  }

  /// One pass per cell: evaluates every reaction once, deriving both the
  /// channel rates and the drift aggregates R_C = sum gamma lambda,
  /// R_D likewise, from the same values.
  void refresh_cell(int j) {
    auto jj = static_cast<std::size_t>(j);
    double uj = static_cast<double>(countsC_[jj]) / l_;
    double vj = static_cast<double>(countsD_[jj]);
    const auto& rs = net_->reactions();
    double rc = 0.0, rd = 0.0;
    for (std::size_t r = 0; r < rs.size(); ++r) {
      double lam = rs[r].rate(uj, vj);
      if (lam < 0.0) {
        if (lam < kRateFloor) {
          std::ostringstream os;
          os << "negative rate " << lam << " for reaction " << r << " at (u, v) = (" << uj
             << ", " << vj << ")";
          throw std::logic_error(os.str());
        }
        lam = 0.0;
      }
      if (is_c_[r]) {
        rc += gamma_d_[r] * lam;
        rate_buf_[r] = l_ * lam;
      } else {
        rd += gamma_d_[r] * lam;
        rate_buf_[r] = lam;
      }
    }
    drift_rc_[jj] = rc;
    drift_rd_[jj] = rd;
    double diff = static_cast<double>(n_) * static_cast<double>(n_) *
                  static_cast<double>(countsC_[jj]);
    rate_buf_[rs.size()] = diff;
    rate_buf_[rs.size() + 1] = diff;
    tree_.set_block(jj * static_cast<std::size_t>(cpc_), static_cast<std::size_t>(cpc_),
                    rate_buf_.data());
  }

  const ReactionNetwork* net_;
  int n_;
  double l_;
  int cpc_;
  double t_ = 0.0;
  std::vector<std::int64_t> countsC_, countsD_;
  std::vector<double> u_real_, v_real_;  // populated post-truncation
  RateTree tree_;
  std::vector<double> rate_buf_;
  std::vector<double> gamma_d_;
  std::vector<char> is_c_;
  std::vector<KahanCell> int_rc_, int_rd_, int_u_;
  std::vector<double> drift_rc_, drift_rd_;
  std::vector<double> last_t_;
  // incremental spectral bookkeeping for the truncation norm
  std::vector<double> wneg_, va_, vb_;
  double vnorm2_ = 0.0;
  const spectral::TrigTable* tt_ = nullptr;
  std::int64_t max_counts_ = 0;
  std::uint64_t event_count_ = 0;
  std::optional<double> truncated_at_;
  double trunc_window_ = 0.0;
  StateView view_;
};

const StateView& view_of(const SimState& state) { return state.view(); }

void SimStateDeleter::operator()(SimState* p) const { delete p; }

SimStatePtr init_state(const ReactionNetwork& net, const GridFunction& u0,
                       const GridFunction& v0, const SimConfig& cfg) {
  GridFunction::check_cell_count(cfg.n);
  if (u0.n != cfg.n || v0.n != cfg.n)
    throw std::invalid_argument("init_state: grid size mismatch");
  if (cfg.l < static_cast<double>(net.gamma_max()))
    throw std::invalid_argument("init_state: population scale l must be >= |gamma|");
  if (!(cfg.alpha_trunc > 0.0 && cfg.alpha_trunc < 0.5))
    throw std::invalid_argument("init_state: alpha_trunc must lie in (0, 1/2)");
  for (int j = 0; j < cfg.n; ++j) {
    if (u0[j] < 0.0) throw std::invalid_argument("init_state: negative u0");
    double v = v0[j];
    if (v < 0.0 || std::abs(v - std::round(v)) > 1e-9)
      throw std::invalid_argument("init_state: v0 must be integer-valued and nonnegative");
  }
  if (linf_norm(u0) >= cfg.M)
    throw std::invalid_argument("init_state: ||u0||_inf must be < M");
  return SimStatePtr(new SimState(net, u0, v0, cfg));
}

AppliedEvent step(SimState& state, const ReactionNetwork& net, const SimConfig& cfg,
                  rng::Xoshiro256pp& gen) {
  (void)net;
  (void)cfg;
  double lambda = state.total_rate();
  if (!(lambda > 0.0)) throw std::logic_error("step: total rate is zero (absorbing state)");
  double wait = gen.exponential(lambda);
  AppliedEvent ev = state.select_event(state.t() + wait, gen.uniform());
  state.apply(ev);
  return ev;
}

namespace {

std::vector<double> full_sample_grid(const SimConfig& cfg) {
  std::vector<double> s = cfg.sample_times;
  if (s.empty()) s = {cfg.T};
  if (!std::is_sorted(s.begin(), s.end()))
    throw std::invalid_argument("simulate: sample_times must be sorted");
  if (s.front() < 0.0 || s.back() > cfg.T)
    throw std::invalid_argument("simulate: sample_times must lie in [0, T]");
  if (s.front() != 0.0) s.insert(s.begin(), 0.0);
  return s;
}

Trajectory simulate_tau_leap(const ReactionNetwork& net, const GridFunction& u0,
                             const GridFunction& v0, const SimConfig& cfg);

}  // namespace

Trajectory simulate(const ReactionNetwork& net, const GridFunction& u0, const GridFunction& v0,
                    const SimConfig& cfg, std::span<EventObserver* const> observers) {
  if (cfg.mode == SimMode::TauLeap) {
    if (!observers.empty())
      throw std::invalid_argument("simulate: event observers require the exact mode");
    return simulate_tau_leap(net, u0, v0, cfg);
  }

  auto state_ptr = init_state(net, u0, v0, cfg);
  SimState& state = *state_ptr;
  const std::vector<double> samples = full_sample_grid(cfg);
  const int check_every = cfg.trunc_check_every > 0 ? cfg.trunc_check_every : cfg.n;
  const double tau_threshold = cfg.M + 1.0;

  Trajectory traj;
  traj.n = cfg.n;
  traj.l = cfg.l;
  traj.T = cfg.T;
  traj.seed = cfg.seed;
  traj.network_hash = net.hash();
  traj.counts0C = state.countsC();
  traj.counts0D = state.countsD();
  traj.u0 = GridFunction(cfg.n);
  traj.v0 = GridFunction(cfg.n);
  for (int j = 0; j < cfg.n; ++j) {
    traj.u0[j] = state.u(j);
    traj.v0[j] = state.v(j);
  }

  rng::Xoshiro256pp gen(cfg.seed);
  for (EventObserver* obs : observers) obs->on_init(state.view());

  std::size_t next_sample = 0;
  std::uint64_t events_since_check = 0;
  double last_check_t = 0.0;
  bool truncated = false;

  auto record_sample = [&](double at) {
    traj.samples.push_back(state.snapshot(at));
    if (!state.deterministic_phase()) state.advance_time(at);
    for (EventObserver* obs : observers) obs->on_sample(state.view());
  };

  auto detect_truncation = [&](double at) {
    state.mark_truncated(at, at - last_check_t);
    traj.truncated_at = at;
    traj.trunc_window = state.trunc_window();
    truncated = true;
    for (EventObserver* obs : observers) obs->on_truncation(state.view());
  };

  while (next_sample < samples.size()) {
    if (truncated) {
      state.integrate_deterministic(samples[next_sample]);
      record_sample(samples[next_sample]);
      ++next_sample;
      continue;
    }
    double lambda = state.total_rate();
    double t_event =
        lambda > 0.0 ? state.t() + gen.exponential(lambda) : std::numeric_limits<double>::infinity();
    double select_draw = lambda > 0.0 ? gen.uniform() : 0.0;

    // Emit every sample that precedes the event; rates are constant in
    // between, so the drawn waiting time stays valid across sample points.
    while (next_sample < samples.size() && samples[next_sample] <= t_event) {
      double ts = samples[next_sample];
      state.flush_all(ts);
      state.advance_time(ts);
      // exact recompute plus tau check on the sample grid
      state.refresh_vnorm();
      if (state.v_neg_norm() > tau_threshold) {
        detect_truncation(ts);
        break;
      }
      last_check_t = ts;
      record_sample(ts);
      ++next_sample;
    }
    if (truncated || next_sample >= samples.size()) continue;

    AppliedEvent ev = state.select_event(t_event, select_draw);
    for (EventObserver* obs : observers) obs->on_event(state.view(), ev);
    state.apply(ev);
    state.assert_population_bound();
    ++events_since_check;

    if (state.sup_exceeds(tau_threshold)) {
      detect_truncation(t_event);
      continue;
    }
    if (events_since_check >= static_cast<std::uint64_t>(check_every)) {
      events_since_check = 0;
      if (state.v_neg_norm() > tau_threshold) {
        detect_truncation(state.t());
        continue;
      }
      last_check_t = state.t();
    }
  }

  traj.event_count = state.event_count();
  if (state.truncated_at()) {
    traj.truncated_at = state.truncated_at();
    traj.trunc_window = state.trunc_window();
  }
  return traj;
}

namespace {

Trajectory simulate_tau_leap(const ReactionNetwork& net, const GridFunction& u0,
                             const GridFunction& v0, const SimConfig& cfg) {
  auto state_ptr = init_state(net, u0, v0, cfg);
  SimState& state = *state_ptr;  // used for init/validation and snapshots
  (void)state;

  const std::vector<double> samples = full_sample_grid(cfg);
  const int n = cfg.n;
  const auto nn = static_cast<std::size_t>(n);
  const auto& rs = net.reactions();

  Trajectory traj;
  traj.n = n;
  traj.l = cfg.l;
  traj.T = cfg.T;
  traj.seed = cfg.seed;
  traj.network_hash = net.hash();
  traj.counts0C = state.countsC();
  traj.counts0D = state.countsD();
  traj.u0 = GridFunction(n);
  traj.v0 = GridFunction(n);
  for (int j = 0; j < n; ++j) {
    traj.u0[j] = state.u(j);
    traj.v0[j] = state.v(j);
  }
  traj.approximate = true;

  std::vector<std::int64_t> cC = traj.counts0C, cD = traj.counts0D;
  std::vector<double> int_rc(nn, 0.0), int_rd(nn, 0.0), int_u(nn, 0.0);
  rng::Xoshiro256pp gen(cfg.seed);
  double t = 0.0;
  std::uint64_t events = 0;

  auto snapshot = [&](double at) {
    TrajectorySample s;
    s.t = at;
    s.u = GridFunction(n);
    s.v = GridFunction(n);
    s.int_rc = GridFunction(n);
    s.int_rd = GridFunction(n);
    GridFunction iu(n);
    for (int j = 0; j < n; ++j) {
      s.u[j] = static_cast<double>(cC[static_cast<std::size_t>(j)]) / cfg.l;
      s.v[j] = static_cast<double>(cD[static_cast<std::size_t>(j)]);
      s.int_rc[j] = int_rc[static_cast<std::size_t>(j)];
      s.int_rd[j] = int_rd[static_cast<std::size_t>(j)];
      iu[j] = int_u[static_cast<std::size_t>(j)];
    }
    s.int_lap = spectral::discrete_laplacian(iu);
    traj.samples.push_back(std::move(s));
  };

  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  for (double ts : samples) {
    while (t < ts - 1e-15) {
      double dt = std::min(cfg.tau_leap_dt, ts - t);
      // Poisson increments per channel with step-start rates, decrements
      // clamped at the available counts (approximate by construction).
      for (int j = 0; j < n; ++j) {
        auto jj = static_cast<std::size_t>(j);
        double uj = static_cast<double>(cC[jj]) / cfg.l;
        double vj = static_cast<double>(cD[jj]);
        int_rc[jj] += net.drift_C(uj, vj) * dt;
        int_rd[jj] += net.drift_D(uj, vj) * dt;
        int_u[jj] += uj * dt;
        for (const auto& r : rs) {
          double rate = std::max(0.0, r.rate(uj, vj));
          double mean = (r.species == Species::C ? cfg.l * rate : rate) * dt;
          std::int64_t k = gen.poisson(mean);
          if (k == 0) continue;
          events += static_cast<std::uint64_t>(k);
          if (r.species == Species::C) {
            std::int64_t delta = static_cast<std::int64_t>(r.gamma) * k;
            if (delta < 0 && cC[jj] + delta < 0) delta = -cC[jj];
            cC[jj] += delta;
          } else {
            std::int64_t delta = static_cast<std::int64_t>(r.gamma) * k;
            if (delta < 0 && cD[jj] + delta < 0) delta = -cD[jj];
            cD[jj] += delta;
          }
        }
        double diff_mean = n2 * static_cast<double>(cC[jj]) * dt;
        std::int64_t kl = gen.poisson(diff_mean);
        std::int64_t kr = gen.poisson(diff_mean);
        if (kl + kr > cC[jj]) {  // clamp, preserving the drawn ratio
          std::int64_t tot = cC[jj];
          std::int64_t nl = (kl + kr) ? tot * kl / (kl + kr) : 0;
          kl = nl;
          kr = tot - nl;
        }
        events += static_cast<std::uint64_t>(kl + kr);
        cC[jj] -= kl + kr;
        cC[static_cast<std::size_t>((j + n - 1) % n)] += kl;
        cC[static_cast<std::size_t>((j + 1) % n)] += kr;
      }
      t += dt;
    }
    snapshot(ts);
  }
  traj.event_count = events;
  return traj;
}

}  // namespace

void replay(const ReactionNetwork& net, const Trajectory& traj, const SimConfig& cfg,
            std::span<const EventRecord> log, std::span<EventObserver* const> observers) {
  const int n = traj.n;
  const int cpc = static_cast<int>(net.reactions().size()) + 2;
  std::vector<std::int64_t> cC = traj.counts0C, cD = traj.counts0D;
  StateView view;
  view.t = 0.0;
  view.n = n;
  view.l = traj.l;
  view.countsC = cC.data();
  view.countsD = cD.data();

  for (EventObserver* obs : observers) obs->on_init(view);

  std::size_t ei = 0;
  bool truncation_emitted = false;
  auto maybe_truncate = [&](double before_time) {
    if (!truncation_emitted && traj.truncated_at && *traj.truncated_at <= before_time) {
      view.t = *traj.truncated_at;
      for (EventObserver* obs : observers) obs->on_truncation(view);
      truncation_emitted = true;
    }
  };

  for (const TrajectorySample& s : traj.samples) {
    while (ei < log.size() && log[ei].t <= s.t) {
      const EventRecord& rec = log[ei];
      AppliedEvent ev;
      ev.t = rec.t;
      ev.channel = rec.channel;
      int cell = static_cast<int>(rec.channel) / cpc;
      int slot = static_cast<int>(rec.channel) % cpc;
      ev.cell = cell;
      ev.slot = slot;
      const int nreact = cpc - 2;
      if (slot < nreact) {
        const model::Reaction& r = net.reactions()[static_cast<std::size_t>(slot)];
        ev.is_diffusion = false;
        ev.species = r.species;
        ev.gamma = r.gamma;
        ev.to_cell = cell;
      } else {
        ev.is_diffusion = true;
        ev.species = Species::C;
        ev.gamma = -1;
        ev.to_cell = (slot == nreact) ? (cell + n - 1) % n : (cell + 1) % n;
      }
      for (EventObserver* obs : observers) obs->on_event(view, ev);
      // apply to the replayed counts
      if (ev.is_diffusion) {
        cC[static_cast<std::size_t>(ev.cell)] -= 1;
        cC[static_cast<std::size_t>(ev.to_cell)] += 1;
      } else if (ev.species == Species::C) {
        cC[static_cast<std::size_t>(ev.cell)] += ev.gamma;
      } else {
        cD[static_cast<std::size_t>(ev.cell)] += ev.gamma;
      }
      view.t = rec.t;
      ++ei;
    }
    maybe_truncate(s.t);
    view.t = s.t;
    for (EventObserver* obs : observers) obs->on_sample(view);
  }
  (void)cfg;
}

MartingalePaths extract_martingales(const Trajectory& traj) {
  if (traj.samples.empty()) throw std::invalid_argument("extract_martingales: empty trajectory");
  MartingalePaths out;
  for (const TrajectorySample& s : traj.samples) {
    out.times.push_back(s.t);
    GridFunction zc(traj.n), zd(traj.n);
    for (int j = 0; j < traj.n; ++j) {
      zc[j] = s.u[j] - traj.u0[j] - s.int_rc[j] - s.int_lap[j];
      zd[j] = s.v[j] - traj.v0[j] - s.int_rd[j];
    }
    out.zc.push_back(std::move(zc));
    out.zd.push_back(std::move(zd));
  }
  return out;
}

// -- ConvolutionAccumulator ---------------------------------------------------

struct ConvolutionAccumulator::Impl {
  const ReactionNetwork* net;
  int n;
  double l;
  int modes;
  bool with_drift;
  bool frozen = false;
  double t_last = 0.0;

  std::vector<double> lam;          // eigenvalues for the tracked modes
  std::vector<double> ya, yb;       // Y coefficients
  std::vector<double> da, db;       // mild drift coefficients
  std::vector<double> rca, rcb;     // R_C field coefficients
  std::vector<double> ua, ub;       // u field coefficients

  std::vector<double> times;
  std::vector<std::vector<double>> snap_ya, snap_yb, snap_da, snap_db;

  const spectral::TrigTable* tt = nullptr;

  // coefficient of the indicator of cell j against mode m (cos part);
  // sqrt(2)/n cos(2 pi m j / n) for m >= 1, 1/n for m = 0
  double phiA(int m, int j) const {
    if (m == 0) return 1.0 / n;
    int k = static_cast<int>((static_cast<long long>(m) * j) % n);
    return std::numbers::sqrt2 / n * tt->c[static_cast<std::size_t>(k)];
  }
  double psiA(int m, int j) const {
    if (m == 0) return 0.0;
    int k = static_cast<int>((static_cast<long long>(m) * j) % n);
    return std::numbers::sqrt2 / n * tt->s[static_cast<std::size_t>(k)];
  }

  void decay_to(double t) {
    double dt = t - t_last;
    if (dt < 0.0) throw std::logic_error("convolution accumulator: time went backwards");
    if (dt == 0.0) return;
    for (int m = 0; m < modes; ++m) {
      auto mm = static_cast<std::size_t>(m);
      double x = lam[mm] * dt;
      double E, I;  // E = exp(-x), I = int_0^dt exp(-lam (dt - s)) ds
      if (x < 1e-3) {
        E = 1.0 - x * (1.0 - x * (0.5 - x / 6.0));
        I = dt * (1.0 - x * (0.5 - x / 6.0));
      } else {
        E = std::exp(-x);
        I = (1.0 - E) / lam[mm];
      }
      if (!frozen) {
        // dZ compensator is R_C + Lap u; (Lap u)^ = -lam u^
        double rho_a = rca[mm] - lam[mm] * ua[mm];
        double rho_b = rcb[mm] - lam[mm] * ub[mm];
        ya[mm] = E * ya[mm] - I * rho_a;
        yb[mm] = E * yb[mm] - I * rho_b;
      } else {
        ya[mm] *= E;
        yb[mm] *= E;
      }
      if (with_drift) {
        da[mm] = E * da[mm] + I * rca[mm];
        db[mm] = E * db[mm] + I * rcb[mm];
      }
    }
    t_last = t;
  }

  void add_cell_delta_u(int j, double du) {
    for (int m = 0; m < modes; ++m) {
      auto mm = static_cast<std::size_t>(m);
      double pa = phiA(m, j), pb = psiA(m, j);
      ya[mm] += du * pa;
      yb[mm] += du * pb;
      ua[mm] += du * pa;
      ub[mm] += du * pb;
    }
  }

  void add_cell_delta_rc(int j, double drc) {
    if (drc == 0.0) return;
    for (int m = 0; m < modes; ++m) {
      auto mm = static_cast<std::size_t>(m);
      rca[mm] += drc * phiA(m, j);
      rcb[mm] += drc * psiA(m, j);
    }
  }

  void refresh_rc(const StateView& st) {
    GridFunction rc(n);
    for (int j = 0; j < n; ++j) rc[j] = net->drift_C(st.u(j), st.v(j));
    SpectralCoeffs c = spectral::analyze(rc);
    for (int m = 0; m < modes; ++m) {
      rca[static_cast<std::size_t>(m)] = c.a[static_cast<std::size_t>(m)];
      rcb[static_cast<std::size_t>(m)] = c.b[static_cast<std::size_t>(m)];
    }
  }

  void snapshot(double t) {
    decay_to(t);
    times.push_back(t);
    snap_ya.push_back(ya);
    snap_yb.push_back(yb);
    if (with_drift) {
      snap_da.push_back(da);
      snap_db.push_back(db);
    }
  }
};

ConvolutionAccumulator::ConvolutionAccumulator(const ReactionNetwork& net, int n, double l,
                                               int n_modes, bool with_mild_drift)
    : impl_(std::make_unique<Impl>()) {
  impl_->net = &net;
  impl_->n = n;
  impl_->l = l;
  impl_->modes = (n_modes <= 0 || n_modes > (n + 1) / 2) ? (n + 1) / 2 : n_modes;
  impl_->with_drift = with_mild_drift;
  impl_->tt = &spectral::trig_table(n);
  auto mc = static_cast<std::size_t>(impl_->modes);
  impl_->lam.resize(mc);
  for (int m = 0; m < impl_->modes; ++m)
    impl_->lam[static_cast<std::size_t>(m)] = spectral::eigenvalue(m, n);
  impl_->ya.assign(mc, 0.0);
  impl_->yb.assign(mc, 0.0);
  impl_->da.assign(mc, 0.0);
  impl_->db.assign(mc, 0.0);
  impl_->rca.assign(mc, 0.0);
  impl_->rcb.assign(mc, 0.0);
  impl_->ua.assign(mc, 0.0);
  impl_->ub.assign(mc, 0.0);
}

ConvolutionAccumulator::~ConvolutionAccumulator() = default;

void ConvolutionAccumulator::on_init(const StateView& st) {
  impl_->t_last = st.t;
  GridFunction u(impl_->n);
  for (int j = 0; j < impl_->n; ++j) u[j] = st.u(j);
  SpectralCoeffs cu = spectral::analyze(u);
  for (int m = 0; m < impl_->modes; ++m) {
    impl_->ua[static_cast<std::size_t>(m)] = cu.a[static_cast<std::size_t>(m)];
    impl_->ub[static_cast<std::size_t>(m)] = cu.b[static_cast<std::size_t>(m)];
  }
  impl_->refresh_rc(st);
}

void ConvolutionAccumulator::on_event(const StateView& pre, const AppliedEvent& ev) {
  Impl& im = *impl_;
  if (im.frozen) return;
  im.decay_to(ev.t);
  if (ev.is_diffusion) {
    double du = 1.0 / im.l;
    double u_from = pre.u(ev.cell), u_to = pre.u(ev.to_cell);
    double v_from = pre.v(ev.cell), v_to = pre.v(ev.to_cell);
    im.add_cell_delta_u(ev.cell, -du);
    im.add_cell_delta_u(ev.to_cell, du);
    im.add_cell_delta_rc(ev.cell, im.net->drift_C(u_from - du, v_from) -
                                      im.net->drift_C(u_from, v_from));
    im.add_cell_delta_rc(ev.to_cell,
                         im.net->drift_C(u_to + du, v_to) - im.net->drift_C(u_to, v_to));
  } else if (ev.species == Species::C) {
    double du = static_cast<double>(ev.gamma) / im.l;
    double u0 = pre.u(ev.cell), v0 = pre.v(ev.cell);
    im.add_cell_delta_u(ev.cell, du);
    im.add_cell_delta_rc(ev.cell, im.net->drift_C(u0 + du, v0) - im.net->drift_C(u0, v0));
  } else {
    // discrete-scale event: no Z_C jump, but the R_C field moves through v
    double u0 = pre.u(ev.cell), v0 = pre.v(ev.cell);
    im.add_cell_delta_rc(ev.cell, im.net->drift_C(u0, v0 + static_cast<double>(ev.gamma)) -
                                      im.net->drift_C(u0, v0));
  }
}

void ConvolutionAccumulator::on_sample(const StateView& state) {
  if (impl_->frozen && impl_->with_drift) impl_->refresh_rc(state);
  impl_->snapshot(state.t);
}

void ConvolutionAccumulator::on_truncation(const StateView& state) {
  impl_->decay_to(state.t);
  impl_->frozen = true;
}

const std::vector<double>& ConvolutionAccumulator::times() const { return impl_->times; }

SpectralCoeffs ConvolutionAccumulator::y_coeffs(std::size_t k) const {
  SpectralCoeffs c(impl_->n);
  for (int m = 0; m < impl_->modes; ++m) {
    c.a[static_cast<std::size_t>(m)] = impl_->snap_ya[k][static_cast<std::size_t>(m)];
    c.b[static_cast<std::size_t>(m)] = impl_->snap_yb[k][static_cast<std::size_t>(m)];
  }
  return c;
}

GridFunction ConvolutionAccumulator::y_values(std::size_t k) const {
  return spectral::synthesize(y_coeffs(k));
}

SpectralCoeffs ConvolutionAccumulator::mild_drift_coeffs(std::size_t k) const {
  if (!impl_->with_drift)
    throw std::logic_error("mild drift was not requested at construction");
  SpectralCoeffs c(impl_->n);
  for (int m = 0; m < impl_->modes; ++m) {
    c.a[static_cast<std::size_t>(m)] = impl_->snap_da[k][static_cast<std::size_t>(m)];
    c.b[static_cast<std::size_t>(m)] = impl_->snap_db[k][static_cast<std::size_t>(m)];
  }
  return c;
}

double ConvolutionAccumulator::sup_linf() const {
  double best = 0.0;
  for (std::size_t k = 0; k < impl_->times.size(); ++k)
    best = std::max(best, linf_norm(y_values(k)));
  return best;
}

double ConvolutionAccumulator::sup_sobolev(double beta) const {
  double best = 0.0;
  for (std::size_t k = 0; k < impl_->times.size(); ++k)
    best = std::max(best, spectral::sobolev_norm(y_coeffs(k), SobolevIndex(beta)));
  return best;
}

ConvolutionPath stochastic_convolution(const ReactionNetwork& net, const Trajectory& traj,
                                       const SimConfig& cfg, std::span<const EventRecord> log,
                                       int n_modes, bool with_mild_drift) {
  ConvolutionAccumulator acc(net, traj.n, traj.l, n_modes, with_mild_drift);
  EventObserver* obs[] = {&acc};
  replay(net, traj, cfg, log, obs);
  ConvolutionPath out;
  out.times = acc.times();
  for (std::size_t k = 0; k < out.times.size(); ++k) {
    out.y.push_back(acc.y_coeffs(k));
    if (with_mild_drift) out.mild_drift.push_back(acc.mild_drift_coeffs(k));
  }
  return out;
}

// -- CompensatorAuditor -------------------------------------------------------

struct CompensatorAuditor::Impl {
  const ReactionNetwork* net;
  int n;
  double l;
  GridFunction probe;
  std::vector<double> w;   // (grad+ phi)^2 + (grad- phi)^2 per cell
  std::vector<double> p;   // phi^2 per cell
  std::vector<double> rt;  // cached R~_C per cell
  double A = 0.0;          // sum_j u_j w_j (unnormalized)
  double B = 0.0;          // sum_j rt_j p_j (unnormalized)
  KahanCell S, G;
  double t_last = 0.0;
  bool frozen = false;

  void advance(double t) {
    double dt = t - t_last;
    if (dt > 0.0 && !frozen)
      G.add(dt * (A + B) / (static_cast<double>(n) * static_cast<double>(n) * l));
    t_last = t;
  }

  void update_cell(const StateView& st, int j, double u_new, double v_new) {
    auto jj = static_cast<std::size_t>(j);
    double u_old = st.u(j);
    (void)u_old;
    A += (u_new - st.u(j)) * w[jj];
    double rt_new = net->drift_C_tilde(u_new, v_new);
    B += (rt_new - rt[jj]) * p[jj];
    rt[jj] = rt_new;
  }
};

CompensatorAuditor::CompensatorAuditor(const ReactionNetwork& net, int n, double l,
                                       GridFunction probe)
    : impl_(std::make_unique<Impl>()) {
  impl_->net = &net;
  impl_->n = n;
  impl_->l = l;
  impl_->probe = std::move(probe);
  GridFunction gp = spectral::discrete_gradient(impl_->probe, spectral::GradDir::Forward);
  GridFunction gm = spectral::discrete_gradient(impl_->probe, spectral::GradDir::Backward);
  impl_->w.resize(static_cast<std::size_t>(n));
  impl_->p.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    impl_->w[static_cast<std::size_t>(j)] = gp[j] * gp[j] + gm[j] * gm[j];
    impl_->p[static_cast<std::size_t>(j)] = impl_->probe[j] * impl_->probe[j];
  }
  impl_->rt.assign(static_cast<std::size_t>(n), 0.0);
}

CompensatorAuditor::~CompensatorAuditor() = default;

void CompensatorAuditor::on_init(const StateView& st) {
  Impl& im = *impl_;
  im.t_last = st.t;
  im.A = 0.0;
  im.B = 0.0;
  for (int j = 0; j < im.n; ++j) {
    auto jj = static_cast<std::size_t>(j);
    im.A += st.u(j) * im.w[jj];
    im.rt[jj] = im.net->drift_C_tilde(st.u(j), st.v(j));
    im.B += im.rt[jj] * im.p[jj];
  }
}

void CompensatorAuditor::on_event(const StateView& pre, const AppliedEvent& ev) {
  Impl& im = *impl_;
  if (im.frozen) return;
  im.advance(ev.t);
  if (ev.is_diffusion) {
    double du = 1.0 / im.l;
    double dz = (im.probe[ev.to_cell] - im.probe[ev.cell]) / (im.l * im.n);
    im.S.add(dz * dz);
    im.update_cell(pre, ev.cell, pre.u(ev.cell) - du, pre.v(ev.cell));
    im.update_cell(pre, ev.to_cell, pre.u(ev.to_cell) + du, pre.v(ev.to_cell));
  } else if (ev.species == Species::C) {
    double dz = static_cast<double>(ev.gamma) / im.l * im.probe[ev.cell] / im.n;
    im.S.add(dz * dz);
    im.update_cell(pre, ev.cell, pre.u(ev.cell) + static_cast<double>(ev.gamma) / im.l,
                   pre.v(ev.cell));
  } else {
    im.update_cell(pre, ev.cell, pre.u(ev.cell),
                   pre.v(ev.cell) + static_cast<double>(ev.gamma));
  }
}

void CompensatorAuditor::on_sample(const StateView& state) { impl_->advance(state.t); }

void CompensatorAuditor::on_truncation(const StateView& state) {
  impl_->advance(state.t);
  impl_->frozen = true;
}

double CompensatorAuditor::S() const { return impl_->S.sum; }
double CompensatorAuditor::G() const { return impl_->G.sum; }

CompensatorAuditResult compensator_audit(const ReactionNetwork& net, const Trajectory& traj,
                                         const SimConfig& cfg, std::span<const EventRecord> log,
                                         const GridFunction& probe) {
  CompensatorAuditor aud(net, traj.n, traj.l, probe);
  EventObserver* obs[] = {&aud};
  replay(net, traj, cfg, log, obs);
  return {aud.S(), aud.G()};
}

// -- test hooks ---------------------------------------------------------------

double channel_rate(const ReactionNetwork& net, int n, double l, std::int64_t countsC_j,
                    std::int64_t countsD_j, int slot) {
  const auto& rs = net.reactions();
  const int nreact = static_cast<int>(rs.size());
  double u = static_cast<double>(countsC_j) / l;
  double v = static_cast<double>(countsD_j);
  if (slot < nreact) {
    const model::Reaction& r = rs[static_cast<std::size_t>(slot)];
    double rate = std::max(0.0, r.rate(u, v));
    return r.species == Species::C ? l * rate : rate;
  }
  return static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(countsC_j);
}

double rate_tree_audit(const SimState& state, const ReactionNetwork& net) {
  double worst = 0.0;
  const int cpc = state.channels_per_cell();
  for (int j = 0; j < state.n(); ++j) {
    for (int s = 0; s < cpc; ++s) {
      double fresh = channel_rate(net, state.n(), state.l(), state.countsC()[static_cast<std::size_t>(j)],
                                  state.countsD()[static_cast<std::size_t>(j)], s);
      double leaf = state.tree().rate(static_cast<std::size_t>(j * cpc + s));
      worst = std::max(worst, std::abs(fresh - leaf));
    }
  }
  return worst;
}

}  // namespace meso::sim
