#include "invadelab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace invadelab {

namespace {

std::int64_t min_norm(EdgeId e) { return std::min(norm_inf(e.base()), norm_inf(e.head())); }
std::int64_t max_norm(EdgeId e) { return std::max(norm_inf(e.base()), norm_inf(e.head())); }

void require_steps(const InvasionTrace& trace, std::int64_t n) {
  if (n < 0 || n > trace.size()) throw std::out_of_range("step horizon exceeds trace length");
}

bool in_xi_window(double w, double eps) { return w > kCriticalP && w <= kCriticalP + eps; }

}  // namespace

BinSpec::BinSpec(std::vector<double> edges) : edges_(std::move(edges)) {
  if (edges_.size() < 2) throw std::invalid_argument("bins need at least two edges");
  for (std::size_t i = 1; i < edges_.size(); ++i) {
    if (!(edges_[i] > edges_[i - 1])) throw std::invalid_argument("bin edges must be strictly increasing");
  }
  if (edges_.front() < 0.0 || edges_.back() > 1.0) throw std::invalid_argument("bin edges must lie in [0,1]");
}

BinSpec BinSpec::uniform(double width) {
  if (!(width > 0.0 && width <= 1.0)) throw std::invalid_argument("bin width must lie in (0,1]");
  const auto k = static_cast<int>(std::lround(1.0 / width));
  std::vector<double> edges(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) edges[static_cast<std::size_t>(i)] = static_cast<double>(i) / k;
  return BinSpec(std::move(edges));
}

std::ptrdiff_t BinSpec::locate(double w) const {
  if (edges_.empty() || w < edges_.front() || w > edges_.back()) return -1;
  if (w == edges_.front()) return 0;
  return std::lower_bound(edges_.begin(), edges_.end(), w) - edges_.begin() - 1;
}

BinnedProfile::BinnedProfile(BinSpec spec)
    : bins(std::move(spec)), q_counts(bins.size(), 0), p_counts(bins.size(), 0) {}

BinnedProfile binned_profile(const InvasionTrace& trace, std::int64_t n, const BinSpec& bins) {
  require_steps(trace, n);
  BinnedProfile out(bins);
  out.n = n;
  for (std::int64_t i = 1; i <= n; ++i) out.add_invaded(trace.weight(i));
  const auto checked = trace.checked_through(n);
  out.checked = static_cast<std::int64_t>(checked.size());
  for (const auto& c : checked) out.add_checked(c.weight);
  return out;
}

std::vector<BinnedProfile> profile_run(const WeightField& field, std::span<const std::int64_t> horizons,
                                       const BinSpec& bins) {
  if (!std::is_sorted(horizons.begin(), horizons.end())) throw std::invalid_argument("horizons must be ascending");
  if (!horizons.empty() && horizons.front() < 0) throw std::invalid_argument("horizons must be >= 0");
  std::vector<BinnedProfile> out;
  BinnedProfile acc(bins);
  InvasionEngine engine(field);
  for (const auto& c : engine.initial_checked()) acc.add_checked(c.weight);
  acc.checked = engine.checked_total();
  for (std::int64_t h : horizons) {
    while (engine.steps() < h) {
      const StepView s = engine.step();
      acc.add_invaded(s.weight);
      for (const auto& c : s.newly_checked) acc.add_checked(c.weight);
    }
    acc.n = engine.steps();
    acc.checked = engine.checked_total();
    out.push_back(acc);
  }
  return out;
}

std::vector<AcceptanceBin> acceptance_profile(std::span<const BinnedProfile> trials, AcceptanceOptions opt) {
  if (trials.empty()) throw std::invalid_argument("acceptance_profile needs at least one trial");
  const BinSpec& bins = trials.front().bins;
  for (const auto& t : trials) {
    if (t.bins != bins) throw std::invalid_argument("all profiles must share bins");
    if (t.n != trials.front().n) throw std::invalid_argument("all profiles must share the step horizon");
  }
  std::vector<AcceptanceBin> out(bins.size());
  std::vector<double> num(trials.size()), den(trials.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    AcceptanceBin& a = out[b];
    a.lo = bins.lo(b);
    a.hi = bins.hi(b);
    for (std::size_t i = 0; i < trials.size(); ++i) {
      num[i] = static_cast<double>(trials[i].q_counts[b]);
      den[i] = static_cast<double>(trials[i].p_counts[b]);
      a.q_sum += trials[i].q_counts[b];
      a.p_sum += trials[i].p_counts[b];
    }
    if (a.p_sum == 0) continue;
    const RatioInterval ci = bootstrap_ratio(num, den, opt.resamples, opt.level, mix64(opt.seed, b));
    a.defined = true;
    a.ratio = static_cast<double>(a.q_sum) / static_cast<double>(a.p_sum);
    a.ci_lo = ci.lo;
    a.ci_hi = ci.hi;
  }
  return out;
}

std::int64_t q_tilde(const InvasionTrace& trace, std::int64_t n, double x) {
  require_steps(trace, n);
  std::int64_t count = 0;
  for (std::int64_t i = 1; i <= n; ++i) count += trace.weight(i) <= x;
  return count;
}

std::int64_t p_tilde(const InvasionTrace& trace, std::int64_t n, double x) {
  require_steps(trace, n);
  std::int64_t count = 0;
  for (const auto& c : trace.checked_through(n)) count += c.weight <= x;
  return count;
}

IdentityReport checked_identity(std::span<const std::int64_t> p_tilde_values,
                                std::span<const std::int64_t> checked_totals, double x) {
  if (p_tilde_values.size() != checked_totals.size()) throw std::invalid_argument("size mismatch");
  IdentityReport r;
  r.x = x;
  Moments m;
  for (std::size_t i = 0; i < p_tilde_values.size(); ++i) {
    m.add(static_cast<double>(p_tilde_values[i]) - x * static_cast<double>(checked_totals[i]));
  }
  r.trials = m.count;
  r.mean_diff = m.mean;
  r.std_error = m.std_error();
  if (r.std_error > 0.0) {
    r.z = r.mean_diff / r.std_error;
  } else {
    r.z = r.mean_diff == 0.0 ? 0.0 : std::copysign(INFINITY, r.mean_diff);
  }
  return r;
}

IdentityReport checked_identity_test(std::span<const InvasionTrace> traces, std::int64_t n, double x) {
  std::vector<std::int64_t> pt, lt;
  for (const auto& t : traces) {
    pt.push_back(p_tilde(t, n, x));
    lt.push_back(t.checked_total(n));
  }
  return checked_identity(pt, lt, x);
}

std::int64_t xi_count(const InvasionTrace& trace, double eps, std::int64_t n) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  require_steps(trace, n);
  std::int64_t count = 0;
  for (const auto& c : trace.checked_through(n)) count += in_xi_window(c.weight, eps);
  for (std::int64_t i = 1; i <= n; ++i) count -= in_xi_window(trace.weight(i), eps);
  return count;
}

std::int64_t radius(const InvasionTrace& trace, std::int64_t n) {
  require_steps(trace, n);
  std::int64_t r = 0;
  for (std::int64_t i = 1; i <= n; ++i) r = std::max(r, max_norm(EdgeId::decode(trace.code(i))));
  return r;
}

StabilizationResult stabilization_radius(const InvasionTrace& trace, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("stabilization radius requires n >= 1");
  require_steps(trace, n);
  StabilizationResult r;
  r.n = n;
  r.horizon = trace.size();
  r.radius_at_horizon = radius(trace, r.horizon);
  if (r.horizon <= n) return r;
  std::int64_t closest = r.radius_at_horizon + 1;
  for (std::int64_t i = n + 1; i <= r.horizon; ++i) closest = std::min(closest, min_norm(EdgeId::decode(trace.code(i))));
  r.k = closest - 1;
  r.censored = r.radius_at_horizon < kStabilizationFactor * (r.k + 1);
  if (!r.censored) {
    std::int64_t last = 0;
    for (std::int64_t i = 1; i <= n; ++i) {
      if (min_norm(EdgeId::decode(trace.code(i))) <= r.k) last = i;
    }
    r.stabilized_at = last;
  }
  return r;
}

StabilizationResult stabilization_radius(const WeightField& field, std::int64_t n, double horizon_factor) {
  if (n < 1) throw std::invalid_argument("stabilization radius requires n >= 1");
  if (!(horizon_factor >= 2.0)) throw std::invalid_argument("horizon_factor must be >= 2");
  const auto horizon = static_cast<std::int64_t>(std::ceil(horizon_factor * static_cast<double>(n)));
  return stabilization_radius(invade_until(field, StopSteps{horizon}), n);
}

std::vector<OutletRecord> detect_outlets(const InvasionTrace& trace) {
  std::vector<OutletRecord> out;
  double later_max = -INFINITY;
  for (std::int64_t i = trace.size(); i >= 1; --i) {
    const double w = trace.weight(i);
    if (w > later_max && w > kCriticalP) out.push_back({i, trace.code(i), w});
    later_max = std::max(later_max, w);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

BoxCounts box_counts(const InvasionTrace& trace, std::int64_t n, double eps) {
  if (n < 1) throw std::invalid_argument("box_counts requires n >= 1");
  if (eps < 0.0) throw std::invalid_argument("eps must be >= 0");
  BoxCounts c;
  c.n = n;
  c.eps = eps;
  const Box box{n, {}};
  for (std::int64_t i = 1; i <= trace.size(); ++i) {
    if (!box.contains(EdgeId::decode(trace.code(i)))) continue;
    ++c.s_n;
    const double w = trace.weight(i);
    c.y_n += w > kCriticalP && w <= kCriticalP + eps;
  }
  c.censored = radius(trace, trace.size()) < kStabilizationFactor * n;
  return c;
}

BoxCounts box_counts_run(const WeightField& field, std::int64_t n, double eps, std::int64_t horizon) {
  if (n < 1) throw std::invalid_argument("box_counts requires n >= 1");
  if (eps < 0.0) throw std::invalid_argument("eps must be >= 0");
  BoxCounts c;
  c.n = n;
  c.eps = eps;
  const Box box{n, {}};
  InvasionEngine engine(field);
  const std::int64_t target = kStabilizationFactor * n;
  while (engine.radius() < target && engine.steps() < horizon) {
    const StepView s = engine.step();
    if (!box.contains(s.edge())) continue;
    ++c.s_n;
    c.y_n += s.weight > kCriticalP && s.weight <= kCriticalP + eps;
  }
  c.censored = engine.radius() < target;
  return c;
}

}  // namespace invadelab
