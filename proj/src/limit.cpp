#include "meso/limit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "meso/spectral.hpp"

namespace meso::pde {

using model::ReactionNetwork;

namespace {

constexpr double kOvershoot = 1e-8;

// RK4 half-step of the pointwise reaction system at the collocation points.
// `with_v` distinguishes the coupled limit system from the externally driven
// lattice PDE (where v is frozen over the step).
void reaction_half_step(const ReactionNetwork& net, std::vector<double>& u,
                        std::vector<double>& v, double h, bool evolve_v, double ucap) {
  if (net.reactions().empty()) return;  // identity step, nothing to reject
  const std::size_t n = u.size();
  auto fu = [&](double uu, double vv) { return net.drift_C(uu, vv); };
  auto fv = [&](double uu, double vv) { return net.drift_D(uu, vv); };
  for (std::size_t j = 0; j < n; ++j) {
    double u0 = u[j], v0 = v[j];
    double k1u = fu(u0, v0), k1v = fv(u0, v0);
    double k2u = fu(u0 + 0.5 * h * k1u, v0 + 0.5 * h * k1v);
    double k2v = fv(u0 + 0.5 * h * k1u, v0 + 0.5 * h * k1v);
    double k3u = fu(u0 + 0.5 * h * k2u, v0 + 0.5 * h * k2v);
    double k3v = fv(u0 + 0.5 * h * k2u, v0 + 0.5 * h * k2v);
    double k4u = fu(u0 + h * k3u, v0 + h * k3v);
    double k4v = fv(u0 + h * k3u, v0 + h * k3v);
    u[j] = u0 + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    if (evolve_v) v[j] = v0 + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (u[j] < -kOvershoot || u[j] > ucap) {
      std::ostringstream os;
      os << "reaction step rejected: u = " << u[j] << " left [0, M+2] at collocation point "
         << j;
      throw std::runtime_error(os.str());
    }
  }
}

// Spectral diffusion step: multiplier exp(-lambda_m dt) on the coefficients
// of the collocation values. `continuum` selects (2 pi m)^2 (limit PDE)
// versus the lattice eigenvalues (discrete PDE).
void diffusion_step(std::vector<double>& u_values, int n, double dt, bool continuum) {
  GridFunction g(n, u_values);
  SpectralCoeffs c = spectral::analyze(g);
  const int mc = c.mode_count();
  for (int m = 0; m < mc; ++m) {
    double lam = continuum ? std::pow(2.0 * std::numbers::pi * m, 2)
                           : spectral::eigenvalue(m, n);
    double mult = std::exp(-lam * dt);
    c.a[static_cast<std::size_t>(m)] *= mult;
    c.b[static_cast<std::size_t>(m)] *= mult;
  }
  u_values = spectral::synthesize(c).values;
}

std::vector<double> default_samples(double T, std::vector<double> req) {
  if (req.empty()) req = {0.0, T};
  if (!std::is_sorted(req.begin(), req.end()))
    throw std::invalid_argument("sample_times must be sorted");
  if (req.front() != 0.0) req.insert(req.begin(), 0.0);
  if (req.back() > T) throw std::invalid_argument("sample_times exceed T");
  return req;
}

}  // namespace

const GridFunction& DrivingPath::at(double t) const {
  if (times.empty()) throw std::invalid_argument("DrivingPath: empty");
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t idx = (it == times.begin()) ? 0 : static_cast<std::size_t>(it - times.begin() - 1);
  return values[idx];
}

LimitSolution solve_limit(const ReactionNetwork& net, const SpectralCoeffs& u0,
                          const GridFunction& v0, double T, double dt, int m_ref,
                          std::vector<double> sample_times, bool record_dense) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_limit: dt must be positive");
  GridFunction::check_cell_count(m_ref);
  if (u0.n > m_ref)
    throw std::invalid_argument("solve_limit: u0 resolution exceeds m_ref");
  if (v0.n != m_ref) throw std::invalid_argument("solve_limit: v0 must live on m_ref cells");

  // zero-pad u0 to the collocation resolution and take point values
  SpectralCoeffs c0(m_ref);
  for (int m = 0; m < u0.mode_count(); ++m) {
    c0.a[static_cast<std::size_t>(m)] = u0.a[static_cast<std::size_t>(m)];
    c0.b[static_cast<std::size_t>(m)] = u0.b[static_cast<std::size_t>(m)];
  }
  std::vector<double> u = spectral::synthesize(c0).values;
  std::vector<double> v = v0.values;

  LimitSolution sol;
  sol.m_ref = m_ref;
  sol.dt = dt;
  const std::vector<double> samples = default_samples(T, std::move(sample_times));
  const double bound = std::max(net.M(), linf_norm(GridFunction(m_ref, u)));
  const double ucap = net.M() + 2.0;

  double margin = -std::numeric_limits<double>::infinity();
  auto track = [&](const std::vector<double>& uu) {
    double m = 0.0;
    for (double x : uu) m = std::max(m, std::abs(x));
    margin = std::max(margin, m - bound);
  };
  auto record = [&](double t) {
    sol.times.push_back(t);
    sol.u.push_back(spectral::analyze(GridFunction(m_ref, u)));
    sol.v.push_back(GridFunction(m_ref, v));
  };
  auto record_step = [&](double t) {
    if (record_dense) {
      sol.dense_times.push_back(t);
      sol.dense_u.push_back(u);
    }
  };

  double t = 0.0;
  track(u);
  record_step(0.0);
  std::size_t si = 0;
  if (samples[si] == 0.0) {
    record(0.0);
    ++si;
  }
  while (si < samples.size()) {
    double target = samples[si];
    while (t < target - 1e-12 * std::max(1.0, target)) {
      double h = std::min(dt, target - t);
      reaction_half_step(net, u, v, 0.5 * h, /*evolve_v=*/true, ucap);
      diffusion_step(u, m_ref, h, /*continuum=*/true);
      reaction_half_step(net, u, v, 0.5 * h, /*evolve_v=*/true, ucap);
      t += h;
      track(u);
      record_step(t);
    }
    record(target);
    ++si;
  }
  sol.max_principle_margin = margin;
  return sol;
}

LatticeSolution solve_lattice_pde(const ReactionNetwork& net, const GridFunction& u0,
                                  const DrivingPath& v_path, double T, double dt,
                                  std::vector<double> sample_times) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_lattice_pde: dt must be positive");
  if (v_path.times.empty() || v_path.times.back() < T - dt)
    throw std::invalid_argument("solve_lattice_pde: driving path does not cover [0, T]");
  const int n = u0.n;
  std::vector<double> w = u0.values;
  std::vector<double> vbuf(static_cast<std::size_t>(n));

  LatticeSolution sol;
  sol.n = n;
  sol.dt = dt;
  const std::vector<double> samples = default_samples(T, std::move(sample_times));
  const double bound = std::max(net.M(), linf_norm(u0));
  const double ucap = net.M() + 2.0;
  double margin = -std::numeric_limits<double>::infinity();
  auto track = [&]() {
    double m = 0.0;
    for (double x : w) m = std::max(m, std::abs(x));
    margin = std::max(margin, m - bound);
  };
  auto record = [&](double t) {
    sol.times.push_back(t);
    sol.w.push_back(GridFunction(n, w));
  };

  double t = 0.0;
  track();
  std::size_t si = 0;
  if (samples[si] == 0.0) {
    record(0.0);
    ++si;
  }
  while (si < samples.size()) {
    double target = samples[si];
    while (t < target - 1e-12 * std::max(1.0, target)) {
      double h = std::min(dt, target - t);
      const GridFunction& vg = v_path.at(t + 0.5 * h);
      if (vg.n != n) throw std::invalid_argument("solve_lattice_pde: driver size mismatch");
      vbuf = vg.values;
      reaction_half_step(net, w, vbuf, 0.5 * h, /*evolve_v=*/false, ucap);
      diffusion_step(w, n, h, /*continuum=*/false);
      vbuf = vg.values;
      reaction_half_step(net, w, vbuf, 0.5 * h, /*evolve_v=*/false, ucap);
      t += h;
      track();
    }
    record(target);
    ++si;
  }
  sol.sup_bound_margin = margin;
  return sol;
}

std::vector<GridFunction> memory_form_v(const ReactionNetwork& net, const LimitSolution& sol,
                                        const GridFunction& v0) {
  if (sol.dense_times.empty())
    throw std::invalid_argument("memory_form_v: solve_limit must be run with record_dense");
  if (v0.n != sol.m_ref) throw std::invalid_argument("memory_form_v: v0 size mismatch");
  const double dd = net.d_D();
  const std::size_t n = static_cast<std::size_t>(sol.m_ref);

  std::vector<GridFunction> out;
  out.reserve(sol.dense_times.size());
  std::vector<double> acc = v0.values;  // running value of the formula
  std::vector<double> b_prev(n), b_cur(n);
  for (std::size_t j = 0; j < n; ++j) b_prev[j] = net.b_D(sol.dense_u[0][j]);
  out.push_back(GridFunction(sol.m_ref, acc));

  for (std::size_t k = 1; k < sol.dense_times.size(); ++k) {
    double h = sol.dense_times[k] - sol.dense_times[k - 1];
    double eh = std::exp(dd * h);
    for (std::size_t j = 0; j < n; ++j) {
      b_cur[j] = net.b_D(sol.dense_u[k][j]);
      // exact exponential propagation + trapezoid on the source term
      acc[j] = eh * acc[j] + 0.5 * h * (eh * b_prev[j] + b_cur[j]);
    }
    std::swap(b_prev, b_cur);
    out.push_back(GridFunction(sol.m_ref, acc));
  }
  return out;
}

}  // namespace meso::pde
