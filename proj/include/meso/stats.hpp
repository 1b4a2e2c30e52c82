#pragma once

// Small statistics kit for the ensemble studies: location estimates,
// ordinary least squares on log-log data, and seeded bootstrap confidence
// intervals (percentile method, 1000 resamples by default).

#include <cstdint>
#include <functional>
#include <vector>

namespace meso::stats {

double mean(const std::vector<double>& xs);
double variance(const std::vector<double>& xs);  // unbiased
double median(std::vector<double> xs);
double percentile(std::vector<double> xs, double p);  // p in [0, 100]

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
/// OLS of log(y) against log(x); requires positive data.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Percentile bootstrap CI of a statistic of one sample.
Interval bootstrap_ci(const std::vector<double>& xs,
                      const std::function<double(const std::vector<double>&)>& stat,
                      int resamples, std::uint64_t seed, double level = 0.95);

/// Percentile bootstrap CI of the log-log slope fitted through per-group
/// location estimates (groups resampled independently).
Interval bootstrap_slope_ci(const std::vector<double>& x,
                            const std::vector<std::vector<double>>& groups,
                            const std::function<double(const std::vector<double>&)>& stat,
                            int resamples, std::uint64_t seed, double level = 0.95);

}  // namespace meso::stats
