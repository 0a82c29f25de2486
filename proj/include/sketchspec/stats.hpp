#pragma once

// Small-sample statistics for Monte Carlo summaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sketchspec/error.hpp"

namespace sketchspec::stats {

/// Hyndman-Fan type 7 quantile (linear interpolation between order
/// statistics, as R and NumPy default). `sorted` must be ascending.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level outside [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, q);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

struct Interval {
  double lo;
  double hi;
};

/// Distribution-free confidence interval for the median from order
/// statistics: [x_(l), x_(n+1-l)] with l the largest index such that
/// P(l <= Bin(n, 1/2) <= n - l) >= level.
inline Interval median_ci(std::vector<double> xs, double level = 0.95) {
  if (xs.size() < 6) throw InvalidArgument("median_ci needs at least 6 observations");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  const double nd = static_cast<double>(n);
  auto log_pmf = [&](std::size_t k) {
    const double kd = static_cast<double>(k);
    return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) - nd * std::log(2.0);
  };
  // Tail mass P(Bin <= l - 1); grow l while the two tails stay within 1 - level.
  std::size_t l = 0;
  double tail = 0.0;
  while (l + 1 <= n / 2) {
    const double next = tail + std::exp(log_pmf(l));
    if (2.0 * next > 1.0 - level) break;
    tail = next;
    ++l;
  }
  if (l == 0) return Interval{xs.front(), xs.back()};
  return Interval{xs[l - 1], xs[n - l]};
}

/// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) throw InvalidArgument("wilson_interval with n = 0");
  const double nd = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nd;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nd;
  const double centre = (p + z2 / (2.0 * nd)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd)) / denom;
  // The bounds are exactly 0 and 1 at the extremes; rounding would leave ~1e-19.
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, centre + half);
  return Interval{lo, hi};
}

/// Pooled two-proportion z statistic for H1: p1 > p2. Zero when both are 0 or 1.
inline double two_proportion_z(std::size_t x1, std::size_t n1, std::size_t x2, std::size_t n2) {
  if (n1 == 0 || n2 == 0) throw InvalidArgument("two_proportion_z with an empty sample");
  const double p1 = static_cast<double>(x1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(x2) / static_cast<double>(n2);
  const double pool = static_cast<double>(x1 + x2) / static_cast<double>(n1 + n2);
  const double se = std::sqrt(pool * (1.0 - pool) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
  if (se == 0.0) return 0.0;
  return (p1 - p2) / se;
}

/// One-sided 95% critical value of the standard normal.
inline constexpr double kZ95OneSided = 1.6448536269514722;

}  // namespace sketchspec::stats
