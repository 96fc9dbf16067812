#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace invadelab {

/// Running count/mean/M2 with the pairwise (Chan et al.) merge, so partial
/// sums from independent workers combine associatively.
struct Moments {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const Moments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double delta = o.mean - mean;
    mean += delta * static_cast<double>(o.count) / n;
    m2 += o.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }

  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const { return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

/// A Monte Carlo estimate with provenance.
struct Estimate {
  double mean = 0.0;
  std::int64_t trials = 0;
  double std_error = 0.0;
  std::uint64_t seed0 = 0;
  std::string config_digest;

  // Seeds used: trial_seed(seed0, i) for i in [0, trials).
  std::uint64_t seed_first() const { return seed0; }

  static Estimate from_indicators(std::int64_t hits, std::int64_t trials, std::uint64_t seed0);
  static Estimate from_moments(const Moments& m, std::uint64_t seed0);

  double lower(double z) const { return mean - z * std_error; }
  double upper(double z) const { return mean + z * std_error; }
};

inline Estimate Estimate::from_indicators(std::int64_t hits, std::int64_t trials, std::uint64_t seed0) {
  Estimate e;
  e.trials = trials;
  e.seed0 = seed0;
  if (trials > 0) {
    e.mean = static_cast<double>(hits) / static_cast<double>(trials);
    e.std_error = std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(trials));
  }
  return e;
}

inline Estimate Estimate::from_moments(const Moments& m, std::uint64_t seed0) {
  Estimate e;
  e.mean = m.mean;
  e.trials = m.count;
  e.std_error = m.std_error();
  e.seed0 = seed0;
  return e;
}

/// Percentile bootstrap of the ratio-of-sums sum(num)/sum(den) over trials.
/// Resampling uses a fixed-seed std::mt19937_64, so the interval is reproducible.
struct RatioInterval {
  double ratio = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool defined = false;
};
RatioInterval bootstrap_ratio(std::span<const double> num, std::span<const double> den, int resamples,
                              double level, std::uint64_t seed);

}  // namespace invadelab
