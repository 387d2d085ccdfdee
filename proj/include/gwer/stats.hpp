#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "gwer/error.hpp"

namespace gwer {

// Welford accumulator with exact pairwise merge.
struct MomentAccumulator {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();

  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
    if (x < vmin) vmin = x;
    if (x > vmax) vmax = x;
  }

  void merge(const MomentAccumulator& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    double d = o.mean - mean;
    std::int64_t nt = n + o.n;
    mean += d * static_cast<double>(o.n) / static_cast<double>(nt);
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) /
                     static_cast<double>(nt);
    n = nt;
    if (o.vmin < vmin) vmin = o.vmin;
    if (o.vmax > vmax) vmax = o.vmax;
  }

  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : std::numeric_limits<double>::quiet_NaN(); }

  // Standard error of the mean; NaN sentinel when n < 2.
  double sem() const {
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(m2 / (static_cast<double>(n) * static_cast<double>(n - 1)));
  }
};

struct EstimateCI {
  double mean = 0.0;
  double stderr_mean = 0.0;
  std::int64_t n = 0;
};

inline EstimateCI estimate(const MomentAccumulator& a) { return {a.mean, a.sem(), a.n}; }

enum class CiLevel { p95, p99, sigma3 };

inline double ci_multiplier(CiLevel level) {
  switch (level) {
    case CiLevel::p95: return 1.959963984540054;
    case CiLevel::p99: return 2.5758293035489004;
    case CiLevel::sigma3: return 3.0;
  }
  return 3.0;
}

struct Interval {
  double mean;
  double half_width;
  std::int64_t n;
};

inline Interval ci(const MomentAccumulator& a, CiLevel level) {
  if (a.n < 2) fail(Errc::TooFewSamples, "confidence interval needs n >= 2");
  return {a.mean, ci_multiplier(level) * a.sem(), a.n};
}

// Ratio of means with jackknife bias correction and stderr, for paired samples.
struct RatioEstimate {
  double ratio = 0.0;       // mean(num)/mean(den)
  double ratio_jack = 0.0;  // jackknife-corrected
  double stderr_jack = 0.0;
  std::int64_t n = 0;
};

inline RatioEstimate ratio_jackknife(std::span<const double> num, std::span<const double> den) {
  std::int64_t n = static_cast<std::int64_t>(num.size());
  if (n < 2 || den.size() != num.size()) fail(Errc::TooFewSamples, "ratio_jackknife needs paired n >= 2");
  double sx = 0.0, sy = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    sx += num[i];
    sy += den[i];
  }
  RatioEstimate r;
  r.n = n;
  r.ratio = sx / sy;
  double mean_loo = 0.0;
  for (std::int64_t i = 0; i < n; ++i) mean_loo += (sx - num[i]) / (sy - den[i]);
  mean_loo /= static_cast<double>(n);
  r.ratio_jack = static_cast<double>(n) * r.ratio - static_cast<double>(n - 1) * mean_loo;
  double ss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double d = (sx - num[i]) / (sy - den[i]) - mean_loo;
    ss += d * d;
  }
  r.stderr_jack = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * ss);
  return r;
}

// |a - b| in units of the combined standard error.
inline double sigma_distance(double a, double sem_a, double b, double sem_b) {
  double s = std::sqrt(sem_a * sem_a + sem_b * sem_b);
  if (s == 0.0) return a == b ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(a - b) / s;
}

}  // namespace gwer
