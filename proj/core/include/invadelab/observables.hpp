#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "invadelab/invasion.hpp"
#include "invadelab/stats.hpp"
#include "invadelab/weights.hpp"

namespace invadelab {

/// Weight bins (a_0, a_1], (a_1, a_2], ...; the first bin also takes a_0.
/// Weights outside [a_0, a_last] fall in no bin.
class BinSpec {
 public:
  BinSpec() = default;
  explicit BinSpec(std::vector<double> edges);
  // [0, 1] split into round(1 / width) equal bins; edges are i / k exactly.
  static BinSpec uniform(double width);

  std::size_t size() const { return edges_.empty() ? 0 : edges_.size() - 1; }
  std::span<const double> edges() const { return edges_; }
  double lo(std::size_t b) const { return edges_[b]; }
  double hi(std::size_t b) const { return edges_[b + 1]; }
  // Bin index of w, or -1.
  std::ptrdiff_t locate(double w) const;

  friend bool operator==(const BinSpec&, const BinSpec&) = default;

 private:
  std::vector<double> edges_;
};

/// Per-bin counts of invaded weights (increments of Q~) and checked weights
/// (increments of P~) up to step n.
struct BinnedProfile {
  BinSpec bins;
  std::vector<std::int64_t> q_counts;
  std::vector<std::int64_t> p_counts;
  std::int64_t n = 0;        // steps
  std::int64_t checked = 0;  // L_n

  explicit BinnedProfile(BinSpec spec = {});
  void add_invaded(double w) {
    if (auto b = bins.locate(w); b >= 0) ++q_counts[static_cast<std::size_t>(b)];
  }
  void add_checked(double w) {
    if (auto b = bins.locate(w); b >= 0) ++p_counts[static_cast<std::size_t>(b)];
  }
};

BinnedProfile binned_profile(const InvasionTrace& trace, std::int64_t n, const BinSpec& bins);

/// Runs one invasion and snapshots the profile at every horizon (ascending).
std::vector<BinnedProfile> profile_run(const WeightField& field, std::span<const std::int64_t> horizons,
                                       const BinSpec& bins);

struct AcceptanceBin {
  double lo = 0.0, hi = 0.0;
  std::int64_t q_sum = 0, p_sum = 0;
  bool defined = false;  // false when no weight was checked in the bin
  double ratio = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
};

struct AcceptanceOptions {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0x5EEDULL;
};

/// Ratio-of-sums estimate of a_n per bin with a percentile bootstrap over
/// trials. All profiles must share bins and horizon.
std::vector<AcceptanceBin> acceptance_profile(std::span<const BinnedProfile> trials, AcceptanceOptions opt = {});

/// Q~_n(x), P~_n(x): invaded / checked weights <= x through step n.
std::int64_t q_tilde(const InvasionTrace& trace, std::int64_t n, double x);
std::int64_t p_tilde(const InvasionTrace& trace, std::int64_t n, double x);

struct IdentityReport {
  double x = 0.0;
  std::int64_t trials = 0;
  double mean_diff = 0.0;  // mean of P~_n(x) - x L_n
  double std_error = 0.0;
  double z = 0.0;          // 0 when the difference is identically 0
  bool pass() const { return z > -4.0 && z < 4.0; }
};

/// z-test of E[P~_n(x)] = x E[L_n] from per-trial (P~_n(x), L_n) pairs.
IdentityReport checked_identity(std::span<const std::int64_t> p_tilde_values,
                                std::span<const std::int64_t> checked_totals, double x);
IdentityReport checked_identity_test(std::span<const InvasionTrace> traces, std::int64_t n, double x);

/// Xi_n(eps): checked through n with weight in (p_c, p_c + eps], not invaded.
std::int64_t xi_count(const InvasionTrace& trace, double eps, std::int64_t n);

/// R_n: smallest k with the first n invaded edges inside B(k); R_0 = 0.
std::int64_t radius(const InvasionTrace& trace, std::int64_t n);

struct StabilizationResult {
  std::int64_t n = 0;
  std::int64_t horizon = 0;
  // Largest k with no invaded edge meeting B(k) during (n, horizon]; -1 when
  // the origin itself is touched.
  std::int64_t k = -1;
  // Last step <= horizon whose edge meets B(k); nullopt when censored.
  std::optional<std::int64_t> stabilized_at;
  bool censored = true;
  std::int64_t radius_at_horizon = 0;
};

/// Runs to horizon = ceil(horizon_factor * n) steps. The answer is certified
/// (not censored) only when the invasion radius at the horizon has reached
/// kStabilizationFactor * (k + 1).
StabilizationResult stabilization_radius(const WeightField& field, std::int64_t n, double horizon_factor = 16.0);
StabilizationResult stabilization_radius(const InvasionTrace& trace, std::int64_t n);

struct OutletRecord {
  std::int64_t step = 0;
  std::uint64_t code = 0;
  double weight = 0.0;
  EdgeId edge() const { return EdgeId::decode(code); }
  friend bool operator==(const OutletRecord&, const OutletRecord&) = default;
};

/// Steps whose weight exceeds p_c and every later weight in the trace.
std::vector<OutletRecord> detect_outlets(const InvasionTrace& trace);

struct BoxCounts {
  std::int64_t n = 0;
  double eps = 0.0;
  std::int64_t s_n = 0;   // invaded edges inside B(n)
  std::int64_t y_n = 0;   // of which weight in (p_c, p_c + eps]
  bool censored = true;   // trace radius below kStabilizationFactor * n
};

BoxCounts box_counts(const InvasionTrace& trace, std::int64_t n, double eps);
/// Streaming version: invades until radius kStabilizationFactor * n or the
/// horizon, without storing a trace.
BoxCounts box_counts_run(const WeightField& field, std::int64_t n, double eps, std::int64_t horizon);

}  // namespace invadelab
