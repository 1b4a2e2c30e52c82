#include "meso/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "meso/rng.hpp"

namespace meso::stats {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double variance(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("variance: need at least two points");
  double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

double median(std::vector<double> xs) { return percentile(std::move(xs), 50.0); }

double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) throw std::invalid_argument("percentile: empty sample");
  std::sort(xs.begin(), xs.end());
  double rank = p / 100.0 * static_cast<double>(xs.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(rank));
  auto hi = static_cast<std::size_t>(std::ceil(rank));
  double frac = rank - std::floor(rank);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need matching samples with >= 2 points");
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_tot = syy - sy * sy / n;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  lx.reserve(x.size());
  ly.reserve(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("fit_loglog: data must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return fit_line(lx, ly);
}

Interval bootstrap_ci(const std::vector<double>& xs,
                      const std::function<double(const std::vector<double>&)>& stat,
                      int resamples, std::uint64_t seed, double level) {
  if (xs.empty()) throw std::invalid_argument("bootstrap_ci: empty sample");
  rng::Xoshiro256pp gen(seed);
  std::vector<double> estimates(static_cast<std::size_t>(resamples));
  std::vector<double> buf(xs.size());
  for (int r = 0; r < resamples; ++r) {
    for (auto& b : buf) b = xs[gen.next_u64() % xs.size()];
    estimates[static_cast<std::size_t>(r)] = stat(buf);
  }
  double tail = 100.0 * (1.0 - level) / 2.0;
  Interval ci;
  ci.lo = percentile(estimates, tail);
  ci.hi = percentile(estimates, 100.0 - tail);
  return ci;
}

Interval bootstrap_slope_ci(const std::vector<double>& x,
                            const std::vector<std::vector<double>>& groups,
                            const std::function<double(const std::vector<double>&)>& stat,
                            int resamples, std::uint64_t seed, double level) {
  if (x.size() != groups.size() || x.size() < 3)
    throw std::invalid_argument("bootstrap_slope_ci: need >= 3 groups");
  rng::Xoshiro256pp gen(seed);
  std::vector<double> slopes(static_cast<std::size_t>(resamples));
  std::vector<double> locs(groups.size());
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::vector<double> buf(groups[g].size());
      for (auto& b : buf) b = groups[g][gen.next_u64() % groups[g].size()];
      locs[g] = stat(buf);
    }
    slopes[static_cast<std::size_t>(r)] = fit_loglog(x, locs).slope;
  }
  double tail = 100.0 * (1.0 - level) / 2.0;
  Interval ci;
  ci.lo = percentile(slopes, tail);
  ci.hi = percentile(slopes, 100.0 - tail);
  return ci;
}

}  // namespace meso::stats
