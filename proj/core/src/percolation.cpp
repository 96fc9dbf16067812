#include "invadelab/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "invadelab/parallel.hpp"

namespace invadelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("threshold p must lie in [0,1]");
}

void require_trials(std::int64_t trials) {
  if (trials <= 0) throw std::invalid_argument("trials must be positive");
}

void require_covers(const PercSample& s, const Box& b) {
  const Rect need = Rect::of(b);
  const Rect& r = s.rect();
  if (need.x0 < r.x0 || need.y0 < r.y0 || need.x1 > r.x1 || need.y1 > r.y1) {
    throw std::invalid_argument("sample does not cover the requested box");
  }
}

// Plaquette (dual vertex) grid covering B(n) plus one outer ring:
// plaquette (x, y) has centre (x + 1/2, y + 1/2), x, y in [-n-1, n].
struct PlaquetteGrid {
  std::int64_t n;
  std::int64_t side;
  explicit PlaquetteGrid(std::int64_t radius) : n(radius), side(2 * radius + 2) {}
  std::size_t size() const { return static_cast<std::size_t>(side * side); }
  std::uint32_t id(std::int64_t x, std::int64_t y) const {
    return static_cast<std::uint32_t>((x + n + 1) * side + (y + n + 1));
  }
  std::int64_t px(std::uint32_t i) const { return static_cast<std::int64_t>(i) / side - n - 1; }
  std::int64_t py(std::uint32_t i) const { return static_cast<std::int64_t>(i) % side - n - 1; }
  bool outer(std::int64_t x, std::int64_t y) const { return x == -n - 1 || x == n || y == -n - 1 || y == n; }
  bool inside(std::int64_t x, std::int64_t y) const { return x >= -n - 1 && x <= n && y >= -n - 1 && y <= n; }
};

// Primal edge shared by plaquette (x, y) and its neighbour in direction dir
// (0 = +x, 1 = +y, 2 = -x, 3 = -y).
EdgeId shared_edge(std::int64_t x, std::int64_t y, int dir) {
  switch (dir) {
    case 0: return EdgeId::vertical(x + 1, y);
    case 1: return EdgeId::horizontal(x, y + 1);
    case 2: return EdgeId::vertical(x, y);
    default: return EdgeId::horizontal(x, y);
  }
}
constexpr std::int64_t kDx[4] = {1, 0, -1, 0};
constexpr std::int64_t kDy[4] = {0, 1, 0, -1};

// Flood fill over plaquettes; crossing allowed when pass(edge) is true and the
// target plaquette is not excluded.
template <typename Pass, typename Excluded>
std::vector<std::uint8_t> flood(const PlaquetteGrid& g, std::span<const std::uint32_t> seeds, Pass pass,
                                Excluded excluded) {
  std::vector<std::uint8_t> seen(g.size(), 0);
  std::vector<std::uint32_t> stack;
  for (auto s : seeds) {
    if (!seen[s] && !excluded(s)) {
      seen[s] = 1;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    const std::uint32_t cur = stack.back();
    stack.pop_back();
    const std::int64_t x = g.px(cur), y = g.py(cur);
    for (int d = 0; d < 4; ++d) {
      const std::int64_t nx = x + kDx[d], ny = y + kDy[d];
      if (!g.inside(nx, ny)) continue;
      const std::uint32_t nid = g.id(nx, ny);
      if (seen[nid] || excluded(nid)) continue;
      if (!pass(shared_edge(x, y, d))) continue;
      seen[nid] = 1;
      stack.push_back(nid);
    }
  }
  return seen;
}

std::vector<std::uint32_t> outer_ring(const PlaquetteGrid& g) {
  std::vector<std::uint32_t> out;
  for (std::int64_t x = -g.n - 1; x <= g.n; ++x) {
    for (std::int64_t y = -g.n - 1; y <= g.n; ++y) {
      if (g.outer(x, y)) out.push_back(g.id(x, y));
    }
  }
  return out;
}

// Edges between plaquettes with mark a and mark b (a-side enumerated).
std::vector<EdgeId> interface_edges(const PlaquetteGrid& g, const std::vector<std::uint8_t>& side_a,
                                    const std::vector<std::uint8_t>& side_b) {
  std::vector<EdgeId> edges;
  for (std::uint32_t i = 0; i < g.size(); ++i) {
    if (!side_a[i]) continue;
    const std::int64_t x = g.px(i), y = g.py(i);
    for (int d = 0; d < 4; ++d) {
      const std::int64_t nx = x + kDx[d], ny = y + kDy[d];
      if (!g.inside(nx, ny)) continue;
      if (side_b[g.id(nx, ny)]) edges.push_back(shared_edge(x, y, d));
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace

// ---------------------------------------------------------------------------

SampledWeights::SampledWeights(const WeightField& field, Rect rect) : rect_(rect) {
  if (rect.x1 < rect.x0 || rect.y1 < rect.y0) throw std::invalid_argument("empty rectangle");
  if (rect.vertex_count() >= (std::size_t{1} << 31)) throw std::invalid_argument("rectangle too large");
  check_coord_range({rect.x0, rect.y0});
  check_coord_range({rect.x1, rect.y1});
  h_.assign(rect.vertex_count(), kInf);
  v_.assign(rect.vertex_count(), kInf);
  for (std::int64_t y = rect.y0; y <= rect.y1; ++y) {
    for (std::int64_t x = rect.x0; x <= rect.x1; ++x) {
      const std::uint32_t i = rect.index({x, y});
      if (x < rect.x1) h_[i] = field.weight_code(encode_unchecked(x, y, Orient::Horizontal));
      if (y < rect.y1) v_[i] = field.weight_code(encode_unchecked(x, y, Orient::Vertical));
    }
  }
}

double SampledWeights::weight(EdgeId e) const {
  if (!rect_.contains(e)) throw std::out_of_range("edge outside sampled rectangle");
  const std::uint32_t i = rect_.index(e.base());
  return e.orient() == Orient::Horizontal ? h_[i] : v_[i];
}

PercSample::PercSample(const WeightField& field, Rect rect, double p)
    : PercSample(std::make_shared<const SampledWeights>(field, rect), p) {}

PercSample::PercSample(std::shared_ptr<const SampledWeights> weights, double p)
    : weights_(std::move(weights)), p_(p) {
  require_probability(p);
  label();
}

void PercSample::label() {
  const Rect& r = rect();
  const std::size_t count = r.vertex_count();
  bits_.assign(count, 0);
  uf_.reset(count);
  const auto w = static_cast<std::uint32_t>(r.width());
  for (std::uint32_t i = 0; i < count; ++i) {
    if (weights_->horizontal(i) <= p_) {
      bits_[i] |= 1U;
      uf_.unite(i, i + 1);
    }
    if (weights_->vertical(i) <= p_) {
      bits_[i] |= 2U;
      uf_.unite(i, i + w);
    }
  }
}

bool PercSample::open(EdgeId e) const {
  if (!rect().contains(e)) return false;
  const std::uint32_t i = rect().index(e.base());
  return e.orient() == Orient::Horizontal ? open_h(i) : open_v(i);
}

// ---------------------------------------------------------------------------

bool connection_in_region(const PercSample& s, std::span<const Vertex> a, std::span<const Vertex> b,
                          const Region& region) {
  const Rect& r = s.rect();
  std::vector<std::uint8_t> target(r.vertex_count(), 0);
  for (const Vertex& v : b) {
    if (r.contains(v) && region.contains(v)) target[r.index(v)] = 1;
  }
  std::vector<std::uint8_t> seen(r.vertex_count(), 0);
  std::vector<Vertex> stack;
  for (const Vertex& v : a) {
    if (!r.contains(v) || !region.contains(v)) continue;
    const auto i = r.index(v);
    if (target[i]) return true;
    if (!seen[i]) {
      seen[i] = 1;
      stack.push_back(v);
    }
  }
  while (!stack.empty()) {
    const Vertex v = stack.back();
    stack.pop_back();
    for (const auto& inc : neighbors(v)) {
      if (!region.contains(inc.other) || !s.open(inc.edge)) continue;
      const auto j = r.index(inc.other);
      if (seen[j]) continue;
      if (target[j]) return true;
      seen[j] = 1;
      stack.push_back(inc.other);
    }
  }
  return false;
}

bool horizontal_crossing(const PercSample& s, Rect q) {
  const Rect& r = s.rect();
  if (q.x0 < r.x0 || q.y0 < r.y0 || q.x1 > r.x1 || q.y1 > r.y1) {
    throw std::invalid_argument("crossing rectangle outside sample");
  }
  if (q.x0 == q.x1) return true;
  std::vector<std::uint8_t> seen(r.vertex_count(), 0);
  std::vector<std::uint32_t> stack;
  const auto w = static_cast<std::uint32_t>(r.width());
  for (std::int64_t y = q.y0; y <= q.y1; ++y) {
    const auto i = r.index({q.x0, y});
    seen[i] = 1;
    stack.push_back(i);
  }
  while (!stack.empty()) {
    const std::uint32_t i = stack.back();
    stack.pop_back();
    const Vertex v = r.vertex(i);
    if (v.x == q.x1) return true;
    auto visit = [&](std::uint32_t j) {
      if (!seen[j]) {
        seen[j] = 1;
        stack.push_back(j);
      }
    };
    if (v.x < q.x1 && s.open_h(i)) visit(i + 1);
    if (v.y < q.y1 && s.open_v(i)) visit(i + w);
    if (v.x > q.x0 && s.open_h(i - 1)) visit(i - 1);
    if (v.y > q.y0 && s.open_v(i - w)) visit(i - w);
  }
  return false;
}

bool connected_to_boundary(const PercSample& s, Vertex v, Box box) {
  require_covers(s, box);
  if (!box.contains(v)) throw std::invalid_argument("start vertex outside box");
  if (box.on_boundary(v)) return true;
  const Rect& r = s.rect();
  std::vector<std::uint8_t> seen(r.vertex_count(), 0);
  std::vector<Vertex> stack{v};
  seen[r.index(v)] = 1;
  while (!stack.empty()) {
    const Vertex u = stack.back();
    stack.pop_back();
    for (const auto& inc : neighbors(u)) {
      if (!s.open(inc.edge)) continue;
      const auto j = r.index(inc.other);
      if (seen[j]) continue;
      if (box.on_boundary(inc.other)) return true;
      seen[j] = 1;
      stack.push_back(inc.other);
    }
  }
  return false;
}

bool open_circuit_in_annulus(const PercSample& s, Annulus ann) {
  ann.validate();
  require_covers(s, Box{ann.outer, {}});
  const PlaquetteGrid g(ann.outer);
  const std::uint32_t origin = g.id(0, 0);
  auto pass = [&](EdgeId e) { return !(ann.contains(e) && s.open(e)); };
  const auto ring = outer_ring(g);
  const auto reach = flood(g, ring, pass, [](std::uint32_t) { return false; });
  return !reach[origin];
}

bool closed_dual_circuit_in_annulus(const PercSample& s, Annulus ann) {
  ann.validate();
  const Box box{ann.outer, {}};
  require_covers(s, box);
  const Rect& r = s.rect();
  // Primal flood from the origin; an edge blocks when its dual lies in the
  // dual annulus and is closed.
  auto blocked = [&](EdgeId e) {
    const auto ends = dual(e).endpoints();
    return dual_in_annulus(ends[0], ann) && dual_in_annulus(ends[1], ann) && !s.open(e);
  };
  std::vector<std::uint8_t> seen(r.vertex_count(), 0);
  std::vector<Vertex> stack{{0, 0}};
  seen[r.index({0, 0})] = 1;
  while (!stack.empty()) {
    const Vertex u = stack.back();
    stack.pop_back();
    if (box.on_boundary(u)) return false;
    for (const auto& inc : neighbors(u)) {
      if (!box.contains(inc.other) || blocked(inc.edge)) continue;
      const auto j = r.index(inc.other);
      if (seen[j]) continue;
      seen[j] = 1;
      stack.push_back(inc.other);
    }
  }
  return true;
}

std::optional<std::vector<EdgeId>> outermost_open_circuit(const PercSample& s, Annulus ann) {
  ann.validate();
  require_covers(s, Box{ann.outer, {}});
  const PlaquetteGrid g(ann.outer);
  auto pass = [&](EdgeId e) { return !(ann.contains(e) && s.open(e)); };
  const auto ring = outer_ring(g);
  const auto outside = flood(g, ring, pass, [](std::uint32_t) { return false; });
  const std::uint32_t origin = g.id(0, 0);
  if (outside[origin]) return std::nullopt;
  const std::uint32_t seeds[] = {origin};
  const auto hole = flood(g, seeds, [](EdgeId) { return true; }, [&](std::uint32_t i) { return outside[i] != 0; });
  return interface_edges(g, hole, outside);
}

std::optional<std::vector<EdgeId>> innermost_open_circuit(const PercSample& s, Annulus ann) {
  ann.validate();
  require_covers(s, Box{ann.outer, {}});
  const PlaquetteGrid g(ann.outer);
  auto pass = [&](EdgeId e) { return !(ann.contains(e) && s.open(e)); };
  const std::uint32_t origin = g.id(0, 0);
  const std::uint32_t seeds[] = {origin};
  const auto face = flood(g, seeds, pass, [](std::uint32_t) { return false; });
  const auto ring = outer_ring(g);
  for (auto i : ring) {
    if (face[i]) return std::nullopt;
  }
  const auto rest = flood(g, ring, [](EdgeId) { return true; }, [&](std::uint32_t i) { return face[i] != 0; });
  return interface_edges(g, face, rest);
}

// ---------------------------------------------------------------------------

int dual_crossing_voltage(DualEdgeId d) {
  const EdgeId p = d.primal();
  return (p.orient() == Orient::Horizontal && p.base().y == 0 && p.base().x >= 0) ? 1 : 0;
}

DualWindingComponents::DualWindingComponents(const PercSample& s, Annulus ann) : ann_(ann) {
  ann.validate();
  require_covers(s, Box{ann.outer, {}});
  lo_ = -ann.outer;
  side_ = 2 * ann.outer;
  const auto count = static_cast<std::size_t>(side_ * side_);
  parent_.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) parent_[i] = i;
  potential_.assign(count, 0);
  wound_.assign(count, 0);

  auto add = [&](DualVertex a, DualVertex b) {
    if (!dual_in_annulus(a, ann) || !dual_in_annulus(b, ann)) return;
    const DualEdgeId d = DualEdgeId::between(a, b);
    if (s.open(d.primal())) return;
    const auto ends = d.endpoints();
    const std::int64_t w = dual_crossing_voltage(d);
    auto [ra, pa] = find(id(ends[0]));
    auto [rb, pb] = find(id(ends[1]));
    if (ra == rb) {
      if (w + pb - pa != 0) wound_[ra] = 1;
      return;
    }
    parent_[rb] = ra;
    potential_[rb] = pa - w - pb;
    wound_[ra] = static_cast<std::uint8_t>(wound_[ra] | wound_[rb]);
  };
  for (std::int64_t x = lo_; x < lo_ + side_; ++x) {
    for (std::int64_t y = lo_; y < lo_ + side_; ++y) {
      add({x, y}, {x + 1, y});
      add({x, y}, {x, y + 1});
    }
  }
}

std::uint32_t DualWindingComponents::id(DualVertex d) const {
  return static_cast<std::uint32_t>((d.x - lo_) * side_ + (d.y - lo_));
}

std::pair<std::uint32_t, std::int64_t> DualWindingComponents::find(std::uint32_t x) const {
  // Two passes: locate the root, then compress while fixing potentials.
  std::uint32_t root = x;
  std::int64_t total = 0;
  while (parent_[root] != root) {
    total += potential_[root];
    root = parent_[root];
  }
  std::uint32_t cur = x;
  std::int64_t remaining = total;
  while (parent_[cur] != cur) {
    const std::uint32_t next = parent_[cur];
    const std::int64_t step = potential_[cur];
    parent_[cur] = root;
    potential_[cur] = remaining;
    remaining -= step;
    cur = next;
  }
  return {root, total};
}

bool DualWindingComponents::closes_circuit(DualEdgeId through) const {
  const auto ends = through.endpoints();
  if (!dual_in_annulus(ends[0], ann_) || !dual_in_annulus(ends[1], ann_)) return false;
  const auto [ra, pa] = find(id(ends[0]));
  const auto [rb, pb] = find(id(ends[1]));
  if (ra != rb) return false;
  if (wound_[ra]) return true;
  return dual_crossing_voltage(through) + pb - pa != 0;
}

// ---------------------------------------------------------------------------

ArmReport four_arm(const PercSample& s, EdgeId e, std::int64_t n) {
  if (n < 2) throw std::invalid_argument("four-arm event requires n >= 2");
  const Box box{n, {}};
  require_covers(s, box);
  if (!Box{n - 1, {}}.contains(e)) throw std::invalid_argument("arm edge must lie in B(n-1)");
  const Rect& r = s.rect();
  const Box inner{n - 1, {}};

  // Primal flood from one endpoint; boundary vertices do not expand.
  auto flood_from = [&](Vertex start, std::vector<std::uint8_t>& seen) {
    bool hit = box.on_boundary(start);
    std::vector<Vertex> stack{start};
    seen[r.index(start)] = 1;
    while (!stack.empty()) {
      const Vertex u = stack.back();
      stack.pop_back();
      if (box.on_boundary(u)) {
        hit = true;
        continue;
      }
      for (const auto& inc : neighbors(u)) {
        if (inc.edge == e || !s.open(inc.edge)) continue;
        const auto j = r.index(inc.other);
        if (seen[j]) continue;
        seen[j] = 1;
        stack.push_back(inc.other);
      }
    }
    return hit;
  };
  ArmReport rep;
  std::vector<std::uint8_t> from_base(r.vertex_count(), 0);
  rep.open_base = flood_from(e.base(), from_base);
  rep.separated = !from_base[r.index(e.head())];
  std::vector<std::uint8_t> from_head(r.vertex_count(), 0);
  rep.open_head = flood_from(e.head(), from_head);

  // Closed dual arms: dual edges crossing arm edges (at least one endpoint in
  // B(n-1)); target is the outermost dual ring at sup-norm n - 1/2.
  auto dual_flood = [&](DualVertex start) {
    const std::int64_t side = 2 * n;
    auto did = [&](DualVertex d) { return static_cast<std::size_t>((d.x + n) * side + (d.y + n)); };
    auto in_dual_box = [&](DualVertex d) { return d.x >= -n && d.x < n && d.y >= -n && d.y < n; };
    auto on_ring = [&](DualVertex d) { return d.x == -n || d.x == n - 1 || d.y == -n || d.y == n - 1; };
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(side * side), 0);
    std::vector<DualVertex> stack{start};
    seen[did(start)] = 1;
    while (!stack.empty()) {
      const DualVertex u = stack.back();
      stack.pop_back();
      if (on_ring(u)) return true;
      const DualVertex nb[4] = {{u.x + 1, u.y}, {u.x, u.y + 1}, {u.x - 1, u.y}, {u.x, u.y - 1}};
      for (const DualVertex& v : nb) {
        if (!in_dual_box(v)) continue;
        const EdgeId pe = DualEdgeId::between(u, v).primal();
        if (pe == e) continue;
        if (!inner.contains(pe.base()) && !inner.contains(pe.head())) continue;
        if (s.open(pe)) continue;
        if (seen[did(v)]) continue;
        seen[did(v)] = 1;
        stack.push_back(v);
      }
    }
    return false;
  };
  const auto ends = dual(e).endpoints();
  rep.closed_dual_low = dual_flood(ends[0]);
  rep.closed_dual_high = dual_flood(ends[1]);
  return rep;
}

double crossing_threshold(const SampledWeights& w, Rect q) {
  const Rect& r = w.rect();
  if (q.x0 < r.x0 || q.y0 < r.y0 || q.x1 > r.x1 || q.y1 > r.y1) {
    throw std::invalid_argument("crossing rectangle outside sample");
  }
  if (q.x0 == q.x1) return 0.0;
  struct Item {
    double weight;
    std::uint32_t a, b;
  };
  std::vector<Item> items;
  for (std::int64_t y = q.y0; y <= q.y1; ++y) {
    for (std::int64_t x = q.x0; x <= q.x1; ++x) {
      const auto i = r.index({x, y});
      if (x < q.x1) items.push_back({w.horizontal(i), i, r.index({x + 1, y})});
      if (y < q.y1) items.push_back({w.vertical(i), i, r.index({x, y + 1})});
    }
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.weight < b.weight; });
  const auto count = static_cast<std::uint32_t>(r.vertex_count());
  UnionFind uf(count + 2);
  const std::uint32_t left = count, right = count + 1;
  for (std::int64_t y = q.y0; y <= q.y1; ++y) {
    uf.unite(left, r.index({q.x0, y}));
    uf.unite(right, r.index({q.x1, y}));
  }
  for (const Item& it : items) {
    uf.unite(it.a, it.b);
    if (uf.same(left, right)) return it.weight;
  }
  return kInf;
}

// ---------------------------------------------------------------------------

Estimate crossing_probability(std::int64_t n, std::int64_t m, double p, std::int64_t trials, std::uint64_t seed0,
                              McOptions opt) {
  if (n < 1 || m < 1) throw std::invalid_argument("crossing requires n, m >= 1");
  require_probability(p);
  require_trials(trials);
  const Rect rect{0, 0, n, m};
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(trials), 0);
  for_each_trial(trials, opt.workers, [&](std::int64_t i) {
    const PercSample s(WeightField(trial_seed(seed0, i)), rect, p);
    hit[static_cast<std::size_t>(i)] = horizontal_crossing(s, rect);
  });
  std::int64_t hits = 0;
  for (auto h : hit) hits += h;
  return Estimate::from_indicators(hits, trials, seed0);
}

std::vector<double> crossing_thresholds(std::int64_t n, std::int64_t m, std::int64_t trials, std::uint64_t seed0,
                                        McOptions opt) {
  if (n < 1 || m < 1) throw std::invalid_argument("crossing requires n, m >= 1");
  require_trials(trials);
  const Rect rect{0, 0, n, m};
  std::vector<double> out(static_cast<std::size_t>(trials));
  for_each_trial(trials, opt.workers, [&](std::int64_t i) {
    const SampledWeights w(WeightField(trial_seed(seed0, i)), rect);
    out[static_cast<std::size_t>(i)] = crossing_threshold(w, rect);
  });
  return out;
}

namespace {

// Crossing indicators of the n x n square for trials [first, first + count).
std::int64_t square_hits(std::int64_t n, double p, std::int64_t first, std::int64_t count, std::uint64_t seed0,
                         const McOptions& opt) {
  const Rect rect{0, 0, n, n};
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(count), 0);
  for_each_trial(count, opt.workers, [&](std::int64_t i) {
    const PercSample s(WeightField(trial_seed(seed0, first + i)), rect, p);
    hit[static_cast<std::size_t>(i)] = horizontal_crossing(s, rect);
  });
  std::int64_t hits = 0;
  for (auto h : hit) hits += h;
  return hits;
}

}  // namespace

CorrelationLength correlation_length(double p, double eps, std::int64_t trials, std::uint64_t seed0,
                                     CorrelationOptions opt) {
  require_probability(p);
  if (p == kCriticalP) throw std::invalid_argument("correlation length is undefined at p = p_c = 1/2");
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("eps must lie in (0, 1/2)");
  require_trials(trials);
  const std::int64_t cap = opt.max_trials > 0 ? opt.max_trials : 16 * trials;
  const bool below = p < kCriticalP;
  CorrelationLength out;

  // Decides "sigma(n,n,p) satisfies the threshold", adding trials while the
  // confidence band straddles it.
  auto satisfied = [&](std::int64_t n) {
    std::int64_t used = trials;
    std::int64_t hits = square_hits(n, p, 0, used, seed0, opt.mc);
    for (;;) {
      const Estimate e = Estimate::from_indicators(hits, used, seed0);
      const double se = std::max(e.std_error, 0.5 / static_cast<double>(used));
      const double target = below ? eps : 1.0 - eps;
      const bool yes = below ? e.mean + opt.z * se <= target : e.mean - opt.z * se >= target;
      const bool no = below ? e.mean - opt.z * se > target : e.mean + opt.z * se < target;
      out.trials_used = std::max(out.trials_used, used);
      if (yes || no) return yes;
      if (used * 2 > cap) {
        out.straddled = true;
        return below ? e.mean <= target : e.mean >= target;
      }
      hits += square_hits(n, p, used, used, seed0, opt.mc);
      used *= 2;
    }
  };

  std::int64_t hi = 1;
  while (!satisfied(hi)) {
    if (hi >= opt.max_length) {
      out.censored = true;
      out.length = opt.max_length;
      return out;
    }
    hi *= 2;
  }
  std::int64_t lo = hi / 2;  // lo fails (or is 0)
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (satisfied(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.length = hi;
  return out;
}

PnQn pn_qn(std::int64_t n, double eps, std::int64_t trials, std::uint64_t seed0, McOptions opt) {
  if (n < 1) throw std::invalid_argument("pn_qn requires n >= 1");
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("eps must lie in (0, 1/2)");
  require_trials(trials);
  std::vector<double> thr = crossing_thresholds(n, n, trials, seed0, opt);
  std::sort(thr.begin(), thr.end());
  const double t = static_cast<double>(trials);
  auto sigma = [&](double p) {
    return static_cast<double>(std::upper_bound(thr.begin(), thr.end(), p) - thr.begin()) / t;
  };
  auto se = [&](double s) { return std::sqrt(std::max(s * (1.0 - s), 0.25 / t) / t); };
  constexpr double z = 1.96;
  constexpr int kIterations = 24;  // bracket width 2^-25 on a half-interval

  // Largest p in (lo, hi] where pred holds, pred monotone decreasing in p.
  auto bisect = [&](double lo, double hi, auto pred) {
    for (int it = 0; it < kIterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pred(mid)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return Bracket{lo, hi};
  };

  PnQn out;
  out.n = n;
  out.eps = eps;
  out.trials = trials;
  out.seed0 = seed0;
  // p_n = sup{p > 1/2 : sigma(n,n,p) < 1 - eps}.
  out.p_n = bisect(kCriticalP, 1.0, [&](double p) { return sigma(p) < 1.0 - eps; });
  const Bracket p_lo = bisect(kCriticalP, 1.0, [&](double p) { const double s = sigma(p); return s + z * se(s) < 1.0 - eps; });
  const Bracket p_hi = bisect(kCriticalP, 1.0, [&](double p) { const double s = sigma(p); return s - z * se(s) < 1.0 - eps; });
  out.p_n_ci = {p_lo.lo, p_hi.hi};
  // q_n = inf{q < 1/2 : sigma(n,n,q) > eps}; bisect on the mirrored predicate.
  auto lowest = [&](auto pred) {
    double lo = 0.0, hi = kCriticalP;  // pred false at lo side, true at hi side
    for (int it = 0; it < kIterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pred(mid)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return Bracket{lo, hi};
  };
  out.q_n = lowest([&](double q) { return sigma(q) > eps; });
  const Bracket q_lo = lowest([&](double q) { const double s = sigma(q); return s + z * se(s) > eps; });
  const Bracket q_hi = lowest([&](double q) { const double s = sigma(q); return s - z * se(s) > eps; });
  out.q_n_ci = {q_lo.lo, q_hi.hi};
  return out;
}

Estimate point_to_boundary(double p, std::int64_t n, std::int64_t trials, std::uint64_t seed0, McOptions opt) {
  if (n < 1) throw std::invalid_argument("point_to_boundary requires n >= 1");
  require_probability(p);
  require_trials(trials);
  const Box box{n, {}};
  const Rect rect = Rect::of(box);
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(trials), 0);
  for_each_trial(trials, opt.workers, [&](std::int64_t i) {
    const PercSample s(WeightField(trial_seed(seed0, i)), rect, p);
    hit[static_cast<std::size_t>(i)] = connected_to_boundary(s, {0, 0}, box);
  });
  std::int64_t hits = 0;
  for (auto h : hit) hits += h;
  return Estimate::from_indicators(hits, trials, seed0);
}

Estimate four_arm_probability(std::int64_t n, std::int64_t trials, std::uint64_t seed0, double p, McOptions opt) {
  if (n < 2) throw std::invalid_argument("four_arm_probability requires n >= 2");
  require_probability(p);
  require_trials(trials);
  const Rect rect = Rect::of(Box{n, {}});
  const EdgeId e = EdgeId::horizontal(0, 0);
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(trials), 0);
  for_each_trial(trials, opt.workers, [&](std::int64_t i) {
    const PercSample s(WeightField(trial_seed(seed0, i)), rect, p);
    hit[static_cast<std::size_t>(i)] = four_arm(s, e, n).event();
  });
  std::int64_t hits = 0;
  for (auto h : hit) hits += h;
  return Estimate::from_indicators(hits, trials, seed0);
}

}  // namespace invadelab
