#include "invadelab/events.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "invadelab/invasion.hpp"

namespace invadelab {

namespace {

std::shared_ptr<const SampledWeights> sample_box(const WeightField& field, std::int64_t radius) {
  return std::make_shared<const SampledWeights>(field, Rect::of(Box{radius, {}}));
}

std::vector<Vertex> vertices(std::span<const EdgeId> edges) {
  std::vector<Vertex> out;
  out.reserve(2 * edges.size());
  for (const EdgeId& e : edges) {
    out.push_back(e.base());
    out.push_back(e.head());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Vertex> box_boundary(std::int64_t n) {
  std::vector<Vertex> out;
  if (n == 0) return {{0, 0}};
  for (std::int64_t t = -n; t < n; ++t) {
    out.push_back({t, -n});
    out.push_back({n, t});
    out.push_back({-t, n});
    out.push_back({-n, -t});
  }
  return out;
}

// Root marks for every cluster meeting `seeds`.
std::vector<std::uint8_t> mark_roots(const PercSample& s, std::span<const Vertex> seeds) {
  std::vector<std::uint8_t> marked(s.rect().vertex_count(), 0);
  for (const Vertex& v : seeds) {
    if (s.rect().contains(v)) marked[s.root(v)] = 1;
  }
  return marked;
}

// Open-path reachability from `start` to a vertex satisfying `target`, not
// using the excluded edges.
template <typename Target>
bool reaches(const PercSample& s, Vertex start, EdgeId skip1, std::optional<EdgeId> skip2, Target target) {
  const Rect& r = s.rect();
  std::vector<std::uint8_t> seen(r.vertex_count(), 0);
  std::vector<Vertex> stack{start};
  seen[r.index(start)] = 1;
  while (!stack.empty()) {
    const Vertex u = stack.back();
    stack.pop_back();
    if (target(u)) return true;
    for (const auto& inc : neighbors(u)) {
      if (inc.edge == skip1 || (skip2 && inc.edge == *skip2) || !s.open(inc.edge)) continue;
      const auto j = r.index(inc.other);
      if (seen[j]) continue;
      seen[j] = 1;
      stack.push_back(inc.other);
    }
  }
  return false;
}

void require_scale(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("scale n must be >= 1");
}

// Condition 2 of D(n) / D_int. `outer_target` decides the far end of 2(b).
template <typename OuterTarget>
std::optional<EdgeId> find_bridge(const PercSample& pc, std::int64_t n, double q_hat, std::optional<EdgeId> avoid,
                                  OuterTarget outer_target, bool& dual_gap) {
  const DualWindingComponents dw(pc, Annulus{4 * n, 8 * n});
  const Annulus band{6 * n, 7 * n};
  const Box inner{n, {}};
  auto in_inner = [&](Vertex v) { return inner.contains(v); };
  std::vector<Vertex> inner_vertices;
  for (std::int64_t x = -n; x <= n; ++x) {
    for (std::int64_t y = -n; y <= n; ++y) inner_vertices.push_back({x, y});
  }
  // Clusters of the full open graph that meet B(n); removing f only splits them.
  const auto near = mark_roots(pc, inner_vertices);
  dual_gap = false;
  // Edge codes sort by (x, y, orient), so this scan visits candidates in code order.
  for (std::int64_t x = -7 * n; x <= 7 * n; ++x) {
    for (std::int64_t y = -7 * n; y <= 7 * n; ++y) {
      for (const EdgeId f : {EdgeId::horizontal(x, y), EdgeId::vertical(x, y)}) {
        if (!band.contains(f)) continue;
        const double w = pc.weights().weight(f);
        if (!(w > q_hat && w < kCriticalP)) continue;
        if (!dw.closes_circuit(dual(f))) continue;
        dual_gap = true;
        if (!near[pc.root(f.base())]) continue;
        const Vertex a = f.base(), b = f.head();
        if ((reaches(pc, a, f, avoid, in_inner) && reaches(pc, b, f, std::nullopt, outer_target)) ||
            (reaches(pc, b, f, avoid, in_inner) && reaches(pc, a, f, std::nullopt, outer_target))) {
          return f;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

DkmRadii DkmRadii::dyadic(int k, int m) {
  if (k < 1 || m < 1) throw std::invalid_argument("D_{k,m} requires k, m >= 1");
  if (k + 1 + m > 29) throw std::invalid_argument("D_{k,m} radii exceed the coordinate range");
  static constexpr double kFrac[5] = {0.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0};
  DkmRadii out;
  for (int i = 0; i < 5; ++i) {
    auto r = static_cast<std::int64_t>(std::llround(std::exp2(k + 1 + kFrac[i] * m)));
    if (i > 0) r = std::max(r, out.r[static_cast<std::size_t>(i - 1)] + 1);
    out.r[static_cast<std::size_t>(i)] = r;
  }
  return out;
}

DkmReport detect_event_Dkm(const WeightField& field, const DkmRadii& radii, double p_hat, std::int64_t truncation) {
  const auto& r = radii.r;
  if (r[0] < 1) throw std::invalid_argument("D_{k,m} radii must be >= 1");
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (r[i] <= r[i - 1]) throw std::invalid_argument("D_{k,m} radii must be strictly increasing");
  }
  if (truncation <= r[4]) throw std::invalid_argument("truncation radius M must exceed the outermost radius");
  DkmReport rep;
  rep.radii = radii;
  rep.p_hat = p_hat;
  rep.truncation = truncation;
  const auto w = sample_box(field, truncation);
  const PercSample pc(w, kCriticalP);
  const PercSample ph(w, p_hat);
  rep.open_inner = open_circuit_in_annulus(pc, Annulus{r[0], r[1]});
  rep.closed_dual = closed_dual_circuit_in_annulus(ph, Annulus{r[1], r[2]});
  if (const auto circuit = outermost_open_circuit(pc, Annulus{r[3], r[4]})) {
    rep.open_outer = true;
    const auto from = vertices(*circuit);
    const auto to = box_boundary(truncation);
    rep.outer_to_infinity = connection_in_region(ph, from, to, Region::all());
  }
  return rep;
}

DkmReport detect_event_Dkm(const WeightField& field, int k, int m, const ThresholdManifest& manifest,
                           const ManifestKey& key, std::int64_t truncation) {
  const DkmRadii radii = DkmRadii::dyadic(k, m);
  const double p_hat = manifest.require(radii.r[2], key).p_n.mid();
  if (truncation == 0) truncation = kStabilizationFactor * radii.r[4];
  return detect_event_Dkm(field, radii, p_hat, truncation);
}

DnReport detect_event_Dn(const WeightField& field, std::int64_t n, double q_hat, std::optional<EdgeId> avoid) {
  require_scale(n);
  if (!(q_hat >= 0.0 && q_hat < kCriticalP)) throw std::invalid_argument("q_n must lie in [0, 1/2)");
  DnReport rep;
  rep.n = n;
  rep.q_hat = q_hat;
  const auto w = sample_box(field, 16 * n);
  const PercSample pc(w, kCriticalP);
  const PercSample pq(w, q_hat);
  if (auto c = innermost_open_circuit(pq, Annulus{n, 2 * n})) {
    rep.inner_circuit = true;
    rep.c_star = std::move(*c);
  }
  if (auto d = outermost_open_circuit(pc, Annulus{8 * n, 16 * n})) {
    rep.outer_circuit = true;
    rep.d_star = std::move(*d);
  }
  const Box outer{16 * n, {}};
  rep.f = find_bridge(pc, n, q_hat, avoid, [&](Vertex v) { return outer.on_boundary(v); }, rep.dual_gap);
  rep.bridge = rep.f.has_value();
  return rep;
}

DnReport detect_event_Dn(const WeightField& field, std::int64_t n, const ThresholdManifest& manifest,
                         const ManifestKey& key, std::optional<EdgeId> avoid) {
  return detect_event_Dn(field, n, manifest.require(n, key).q_n.mid(), avoid);
}

bool detect_event_Dn_int(const WeightField& field, std::int64_t n, double q_hat, std::span<const EdgeId> d_hat,
                         std::optional<EdgeId> avoid) {
  require_scale(n);
  if (!(q_hat >= 0.0 && q_hat < kCriticalP)) throw std::invalid_argument("q_n must lie in [0, 1/2)");
  const auto w = sample_box(field, 16 * n);
  const PercSample pq(w, q_hat);
  if (!open_circuit_in_annulus(pq, Annulus{n, 2 * n})) return false;
  const PercSample pc(w, kCriticalP);
  const auto targets = vertices(d_hat);
  auto on_circuit = [&](Vertex v) { return std::binary_search(targets.begin(), targets.end(), v); };
  bool gap = false;
  return find_bridge(pc, n, q_hat, avoid, on_circuit, gap).has_value();
}

bool detect_event_Dn_ext(const WeightField& field, std::int64_t n, std::span<const EdgeId> d_hat) {
  require_scale(n);
  const auto w = sample_box(field, 16 * n);
  const PercSample pc(w, kCriticalP);
  const auto outermost = outermost_open_circuit(pc, Annulus{8 * n, 16 * n});
  if (!outermost) return false;
  std::vector<EdgeId> given(d_hat.begin(), d_hat.end());
  std::sort(given.begin(), given.end());
  if (given != *outermost) return false;
  return connection_in_region(pc, vertices(given), box_boundary(16 * n), Region::all());
}

LkReport detect_event_Lk(const WeightField& field, int k, EdgeId e, double eps) {
  if (k < 2 || k > 26) throw std::invalid_argument("L_k(e) requires 2 <= k <= 26");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const std::int64_t s = std::int64_t{1} << k;
  if (!Annulus{s / 2, s}.contains(e)) throw std::invalid_argument("edge e must lie inside Ann(2^{k-1}, 2^k)");
  LkReport rep;
  const auto w = sample_box(field, 8 * s);
  const PercSample pc(w, kCriticalP);
  const PercSample pe(w, std::min(1.0, kCriticalP + eps));
  rep.closed_dual = closed_dual_circuit_in_annulus(pe, Annulus{4 * s, 8 * s});
  if (const auto circuit = outermost_open_circuit(pc, Annulus{s / 4, s / 2})) {
    rep.inner_circuit = true;
    const Vertex ends[] = {e.base(), e.head()};
    rep.connected = connection_in_region(pc, vertices(*circuit), ends, Region::box(Box{s, {}}));
  }
  return rep;
}

std::int64_t count_Y(const WeightField& field, std::int64_t n, double q_hat) {
  require_scale(n);
  const PercSample pq(sample_box(field, 4 * n), q_hat);
  const auto marked = mark_roots(pq, box_boundary(n));
  const Annulus ann{2 * n, 4 * n};
  std::int64_t count = 0;
  for (std::int64_t x = -4 * n; x <= 4 * n; ++x) {
    for (std::int64_t y = -4 * n; y <= 4 * n; ++y) {
      for (const EdgeId e : {EdgeId::horizontal(x, y), EdgeId::vertical(x, y)}) {
        if (!ann.contains(e) || !(pq.weights().weight(e) > kCriticalP)) continue;
        count += marked[pq.root(e.base())] || marked[pq.root(e.head())];
      }
    }
  }
  return count;
}

std::int64_t count_Z(const WeightField& field, std::int64_t n, std::span<const EdgeId> d_hat, std::int64_t truncation) {
  require_scale(n);
  if (truncation <= 16 * n) throw std::invalid_argument("truncation radius M must exceed 16n");
  const PercSample pc(sample_box(field, truncation), kCriticalP);
  const auto marked = mark_roots(pc, vertices(d_hat));
  std::int64_t count = 0;
  for (std::int64_t x = -truncation; x <= truncation; ++x) {
    for (std::int64_t y = -truncation; y <= truncation; ++y) {
      for (const EdgeId e : {EdgeId::horizontal(x, y), EdgeId::vertical(x, y)}) {
        if (!pc.rect().contains(e)) continue;
        if (norm_inf(e.base()) <= 16 * n || norm_inf(e.head()) <= 16 * n) continue;
        if (!(pc.weights().weight(e) < kCriticalP)) continue;
        count += marked[pc.root(e.base())];
      }
    }
  }
  return count;
}

std::int64_t count_Z_ell(const WeightField& field, std::int64_t n, int ell, std::int64_t truncation) {
  require_scale(n);
  if (ell < 0 || ell > 24) throw std::invalid_argument("ell must lie in [0, 24]");
  const std::int64_t lo = (std::int64_t{1} << ell) * n;
  const std::int64_t hi = 2 * lo;
  if (truncation == 0) truncation = std::max(2 * hi, 16 * n);
  if (truncation < hi || truncation < 16 * n) throw std::invalid_argument("truncation must cover Ann and B(16n)");
  const PercSample pc(sample_box(field, truncation), kCriticalP);
  const auto marked = mark_roots(pc, box_boundary(16 * n));
  const Annulus ann{lo, hi};
  std::int64_t count = 0;
  for (std::int64_t x = -hi; x <= hi; ++x) {
    for (std::int64_t y = -hi; y <= hi; ++y) {
      const Vertex v{x, y};
      if (ann.contains(v)) count += marked[pc.root(v)];
    }
  }
  return count;
}

ExteriorCounts exterior_counts(const WeightField& field, std::int64_t n, int ell, double q_hat,
                               std::int64_t truncation) {
  ExteriorCounts c;
  c.y = count_Y(field, n, q_hat);
  const PercSample pc(sample_box(field, 16 * n), kCriticalP);
  if (const auto d = outermost_open_circuit(pc, Annulus{8 * n, 16 * n})) {
    c.has_circuit = true;
    c.z_circuit = count_Z(field, n, *d, truncation);
  }
  c.z_ell = count_Z_ell(field, n, ell, std::max({truncation, (std::int64_t{2} << ell) * n, 16 * n}));
  return c;
}

}  // namespace invadelab
