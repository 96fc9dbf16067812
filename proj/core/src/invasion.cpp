#include "invadelab/invasion.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace invadelab {

namespace {

constexpr std::int64_t kInitialHalfWidth = 64;

struct HeapGreater {
  bool operator()(const FrontierEntry& a, const FrontierEntry& b) const { return b < a; }
};

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated binary stream");
  return value;
}

constexpr std::uint64_t kStateMagic = 0x31544B43504C4449ULL;  // "IDLPCKT1"
constexpr std::uint64_t kTraceMagic = 0x31435254504C4449ULL;  // "IDLPTRC1"

}  // namespace

InvasionEngine::InvasionEngine(WeightField field) : field_(std::move(field)) {
  grow(kInitialHalfWidth);
  absorb_vertex(0, 0);
  initial_ = scratch_;
  scratch_.clear();
}

void InvasionEngine::grow(std::int64_t needed) {
  std::int64_t half = std::max<std::int64_t>(half_, kInitialHalfWidth);
  while (half < needed) half *= 2;
  if (half >= kCoordLimit / 2) throw RangeError("invasion left the supported coordinate range");
  if (half == half_ && !grid_.empty()) return;
  const std::int64_t side = 2 * half + 1;
  std::vector<std::uint8_t> next(static_cast<std::size_t>(side * side), 0);
  if (!grid_.empty()) {
    const std::int64_t shift = half - half_;
    for (std::int64_t i = 0; i < side_; ++i) {
      std::memcpy(&next[static_cast<std::size_t>((i + shift) * side + shift)],
                  &grid_[static_cast<std::size_t>(i * side_)], static_cast<std::size_t>(side_));
    }
  }
  grid_ = std::move(next);
  half_ = half;
  side_ = side;
}

void InvasionEngine::ensure_fits(std::int64_t x, std::int64_t y) {
  const std::int64_t need = std::max(x < 0 ? -x : x, y < 0 ? -y : y) + 2;
  if (need > half_) grow(need);
}

std::uint8_t InvasionEngine::flags(std::int64_t x, std::int64_t y) const {
  if (x < -half_ || x > half_ || y < -half_ || y > half_) return 0;
  return grid_[index(x, y)];
}

bool InvasionEngine::vertex_invaded(Vertex v) const { return flags(v.x, v.y) & kVertexInvaded; }

bool InvasionEngine::edge_checked(EdgeId e) const {
  const auto bit = e.orient() == Orient::Horizontal ? kHorizontalChecked : kVerticalChecked;
  return flags(e.base().x, e.base().y) & bit;
}

bool InvasionEngine::edge_invaded(EdgeId e) const {
  const auto bit = e.orient() == Orient::Horizontal ? kHorizontalInvaded : kVerticalInvaded;
  return flags(e.base().x, e.base().y) & bit;
}

void InvasionEngine::push(FrontierEntry entry) {
  heap_.push_back(entry);
  std::push_heap(heap_.begin(), heap_.end(), HeapGreater{});
}

FrontierEntry InvasionEngine::pop() {
  std::pop_heap(heap_.begin(), heap_.end(), HeapGreater{});
  const FrontierEntry top = heap_.back();
  heap_.pop_back();
  return top;
}

void InvasionEngine::check_edge(std::int64_t bx, std::int64_t by, Orient o) {
  std::uint8_t& f = grid_[index(bx, by)];
  const std::uint8_t bit = o == Orient::Horizontal ? kHorizontalChecked : kVerticalChecked;
  if (f & bit) return;
  f |= bit;
  const std::uint64_t code = encode_unchecked(bx, by, o);
  const double w = field_.weight_code(code);
  push({w, code});
  scratch_.push_back({code, w});
  ++checked_total_;
}

void InvasionEngine::absorb_vertex(std::int64_t x, std::int64_t y) {
  ensure_fits(x, y);
  std::uint8_t& f = grid_[index(x, y)];
  if (f & kVertexInvaded) return;
  f |= kVertexInvaded;
  check_edge(x, y, Orient::Horizontal);      // E
  check_edge(x, y, Orient::Vertical);        // N
  check_edge(x - 1, y, Orient::Horizontal);  // W
  check_edge(x, y - 1, Orient::Vertical);    // S
}

StepView InvasionEngine::step() {
  if (heap_.empty()) throw std::logic_error("empty frontier");
  scratch_.clear();
  const FrontierEntry top = pop();
  const EdgeId e = EdgeId::decode(top.code);
  const Vertex a = e.base();
  const Vertex b = e.head();
  grid_[index(a.x, a.y)] |= e.orient() == Orient::Horizontal ? kHorizontalInvaded : kVerticalInvaded;
  absorb_vertex(a.x, a.y);
  absorb_vertex(b.x, b.y);
  radius_ = std::max({radius_, norm_inf(a), norm_inf(b)});
  invaded_.push_back(top.code);
  ++step_;
  return {step_, top.code, top.weight, scratch_};
}

std::vector<FrontierEntry> InvasionEngine::frontier_snapshot() const {
  std::vector<FrontierEntry> out = heap_;
  std::sort(out.begin(), out.end());
  return out;
}

EngineState InvasionEngine::save() const {
  EngineState s;
  s.seed = field_.seed();
  s.step = step_;
  s.checked_total = checked_total_;
  s.invaded = invaded_;
  s.frontier.reserve(heap_.size());
  for (const auto& entry : heap_) s.frontier.push_back(entry.code);
  std::sort(s.frontier.begin(), s.frontier.end());
  return s;
}

InvasionEngine InvasionEngine::restore(WeightField field, const EngineState& state) {
  if (field.seed() != state.seed) throw std::invalid_argument("checkpoint seed does not match weight field");
  InvasionEngine eng(std::move(field));
  eng.heap_.clear();
  eng.initial_.clear();
  eng.checked_total_ = 0;
  // Replay the invaded set and frontier flags without re-running the greedy rule.
  for (std::uint64_t code : state.invaded) {
    const EdgeId e = EdgeId::decode(code);
    eng.ensure_fits(e.head().x, e.head().y);
    eng.ensure_fits(e.base().x, e.base().y);
  }
  for (std::uint64_t code : state.frontier) {
    const EdgeId e = EdgeId::decode(code);
    eng.ensure_fits(e.head().x, e.head().y);
  }
  // Reset grid; the constructor already marked the origin star.
  std::fill(eng.grid_.begin(), eng.grid_.end(), 0);
  auto mark_vertex = [&](Vertex v) { eng.grid_[eng.index(v.x, v.y)] |= kVertexInvaded; };
  auto mark_checked = [&](const EdgeId& e) {
    eng.grid_[eng.index(e.base().x, e.base().y)] |=
        e.orient() == Orient::Horizontal ? kHorizontalChecked : kVerticalChecked;
  };
  mark_vertex({0, 0});
  for (std::uint64_t code : state.invaded) {
    const EdgeId e = EdgeId::decode(code);
    mark_vertex(e.base());
    mark_vertex(e.head());
    mark_checked(e);
    eng.grid_[eng.index(e.base().x, e.base().y)] |=
        e.orient() == Orient::Horizontal ? kHorizontalInvaded : kVerticalInvaded;
    eng.radius_ = std::max({eng.radius_, norm_inf(e.base()), norm_inf(e.head())});
  }
  eng.heap_.reserve(state.frontier.size());
  for (std::uint64_t code : state.frontier) {
    mark_checked(EdgeId::decode(code));
    eng.heap_.push_back({eng.field_.weight_code(code), code});
  }
  std::make_heap(eng.heap_.begin(), eng.heap_.end(), HeapGreater{});
  // Step-0 record is deterministic.
  for (const auto& inc : neighbors({0, 0})) {
    const std::uint64_t code = inc.edge.encode();
    eng.initial_.push_back({code, eng.field_.weight_code(code)});
  }
  eng.invaded_ = state.invaded;
  eng.step_ = state.step;
  eng.checked_total_ = state.checked_total;
  if (static_cast<std::int64_t>(state.invaded.size()) != state.step ||
      static_cast<std::int64_t>(state.invaded.size() + state.frontier.size()) != state.checked_total) {
    throw std::invalid_argument("inconsistent checkpoint: |invaded| + |frontier| must equal L_n");
  }
  return eng;
}

void EngineState::write(std::ostream& out) const {
  put(out, kStateMagic);
  put(out, seed);
  put(out, step);
  put(out, checked_total);
  put(out, static_cast<std::uint64_t>(invaded.size()));
  out.write(reinterpret_cast<const char*>(invaded.data()),
            static_cast<std::streamsize>(invaded.size() * sizeof(std::uint64_t)));
  put(out, static_cast<std::uint64_t>(frontier.size()));
  out.write(reinterpret_cast<const char*>(frontier.data()),
            static_cast<std::streamsize>(frontier.size() * sizeof(std::uint64_t)));
}

EngineState EngineState::read(std::istream& in) {
  if (get<std::uint64_t>(in) != kStateMagic) throw std::runtime_error("not an invasion checkpoint");
  EngineState s;
  s.seed = get<std::uint64_t>(in);
  s.step = get<std::int64_t>(in);
  s.checked_total = get<std::int64_t>(in);
  s.invaded.resize(get<std::uint64_t>(in));
  in.read(reinterpret_cast<char*>(s.invaded.data()),
          static_cast<std::streamsize>(s.invaded.size() * sizeof(std::uint64_t)));
  s.frontier.resize(get<std::uint64_t>(in));
  in.read(reinterpret_cast<char*>(s.frontier.data()),
          static_cast<std::streamsize>(s.frontier.size() * sizeof(std::uint64_t)));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return s;
}

// ---------------------------------------------------------------------------

void InvasionTrace::set_initial(std::span<const CheckedEdge> initial) {
  if (!codes_.empty()) throw std::logic_error("initial block must be set before steps");
  checked_.assign(initial.begin(), initial.end());
  initial_count_ = initial.size();
}

void InvasionTrace::append(const StepView& s) {
  codes_.push_back(s.code);
  weights_.push_back(s.weight);
  checked_.insert(checked_.end(), s.newly_checked.begin(), s.newly_checked.end());
  offsets_.push_back(static_cast<std::uint32_t>(checked_.size() - initial_count_));
}

InvasionTrace::Step InvasionTrace::step(std::int64_t n) const {
  if (n < 1 || n > size()) throw std::out_of_range("trace step index");
  const auto i = static_cast<std::size_t>(n - 1);
  const auto* base = checked_.data() + initial_count_;
  return {n, codes_[i], weights_[i],
          std::span<const CheckedEdge>(base + offsets_[i], base + offsets_[i + 1])};
}

std::span<const CheckedEdge> InvasionTrace::initial_checked() const {
  return {checked_.data(), initial_count_};
}

std::span<const CheckedEdge> InvasionTrace::checked_through(std::int64_t n) const {
  if (n < 0 || n > size()) throw std::out_of_range("trace step index");
  return {checked_.data(), initial_count_ + offsets_[static_cast<std::size_t>(n)]};
}

std::int64_t InvasionTrace::checked_total(std::int64_t n) const {
  return static_cast<std::int64_t>(checked_through(n).size());
}

std::uint64_t InvasionTrace::hash() const {
  std::uint64_t h = mix64(seed_ ^ 0x5851F42D4C957F2DULL);
  auto absorb = [&h](std::uint64_t v) { h = mix64(h ^ v) + 0x9E3779B97F4A7C15ULL; };
  absorb(initial_count_);
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    absorb(codes_[i]);
    absorb(std::bit_cast<std::uint64_t>(weights_[i]));
    absorb(offsets_[i + 1]);
  }
  for (const auto& c : checked_) {
    absorb(c.code);
    absorb(std::bit_cast<std::uint64_t>(c.weight));
  }
  return h;
}

void InvasionTrace::write_binary(std::ostream& out) const {
  put(out, kTraceMagic);
  put(out, seed_);
  put(out, static_cast<std::uint64_t>(codes_.size()));
  put(out, static_cast<std::uint64_t>(initial_count_));
  for (std::size_t i = 0; i < initial_count_; ++i) {
    put(out, checked_[i].code);
    put(out, std::bit_cast<std::uint64_t>(checked_[i].weight));
  }
  for (std::int64_t n = 1; n <= size(); ++n) {
    const Step s = step(n);
    put(out, s.code);
    put(out, std::bit_cast<std::uint64_t>(s.weight));
    put(out, static_cast<std::uint8_t>(s.newly_checked.size()));
    for (const auto& c : s.newly_checked) {
      put(out, c.code);
      put(out, std::bit_cast<std::uint64_t>(c.weight));
    }
  }
}

InvasionTrace InvasionTrace::read_binary(std::istream& in) {
  if (get<std::uint64_t>(in) != kTraceMagic) throw std::runtime_error("not an invasion trace");
  InvasionTrace t(get<std::uint64_t>(in));
  const auto steps = get<std::uint64_t>(in);
  const auto initial = get<std::uint64_t>(in);
  std::vector<CheckedEdge> block;
  for (std::uint64_t i = 0; i < initial; ++i) {
    const auto code = get<std::uint64_t>(in);
    block.push_back({code, std::bit_cast<double>(get<std::uint64_t>(in))});
  }
  t.set_initial(block);
  for (std::uint64_t n = 1; n <= steps; ++n) {
    StepView s;
    s.index = static_cast<std::int64_t>(n);
    s.code = get<std::uint64_t>(in);
    s.weight = std::bit_cast<double>(get<std::uint64_t>(in));
    const auto count = get<std::uint8_t>(in);
    block.clear();
    for (std::uint8_t j = 0; j < count; ++j) {
      const auto code = get<std::uint64_t>(in);
      block.push_back({code, std::bit_cast<double>(get<std::uint64_t>(in))});
    }
    s.newly_checked = block;
    t.append(s);
  }
  return t;
}

void InvasionTrace::write_csv(std::ostream& out) const {
  out << kTraceCsvHeader << '\n';
  char buf[64];
  for (std::int64_t n = 1; n <= size(); ++n) {
    const Step s = step(n);
    const EdgeId e = s.edge();
    std::snprintf(buf, sizeof(buf), "%.17g", s.weight);
    out << n << ',' << e.base().x << ',' << e.base().y << ','
        << (e.orient() == Orient::Horizontal ? 'H' : 'V') << ',' << buf << ',' << s.newly_checked.size()
        << '\n';
  }
}

// ---------------------------------------------------------------------------

void validate(const StopRule& rule) {
  std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, StopSteps>) {
          if (r.n < 0) throw std::invalid_argument("Steps(n) requires n >= 0");
        } else if constexpr (std::is_same_v<T, StopRadiusReached>) {
          if (r.k < 1) throw std::invalid_argument("RadiusReached(k) requires k >= 1");
          if (r.budget < 0) throw std::invalid_argument("RadiusReached budget must be >= 0");
        } else {
          if (r.k < 0) throw std::invalid_argument("BoxStabilized(k, horizon) requires k >= 0");
          if (r.horizon < 1) throw std::invalid_argument("BoxStabilized(k, horizon) requires horizon >= 1");
        }
      },
      rule);
}

InvasionTrace invade_until(const WeightField& field, const StopRule& rule) {
  validate(rule);
  InvasionEngine engine(field);
  InvasionTrace trace(field.seed());
  trace.set_initial(engine.initial_checked());
  if (const auto* r = std::get_if<StopSteps>(&rule)) {
    for (std::int64_t i = 0; i < r->n; ++i) trace.append(engine.step());
    trace.stop_reason = "steps";
  } else if (const auto* r = std::get_if<StopRadiusReached>(&rule)) {
    while (engine.radius() < r->k && engine.steps() < r->budget) trace.append(engine.step());
    trace.censored = engine.radius() < r->k;
    trace.stop_reason = trace.censored ? "budget exhausted" : "radius reached";
  } else {
    const auto& b = std::get<StopBoxStabilized>(rule);
    const Box box{b.k, {}};
    const std::int64_t target = kStabilizationFactor * std::max<std::int64_t>(b.k, 1);
    std::int64_t last_touch = 0;
    while (engine.radius() < target && engine.steps() < b.horizon) {
      const StepView s = engine.step();
      const EdgeId e = s.edge();
      if (box.contains(e.base()) || box.contains(e.head())) last_touch = s.index;
      trace.append(s);
    }
    trace.censored = engine.radius() < target;
    trace.stop_reason = trace.censored ? "horizon exhausted" : "box stabilized";
    if (!trace.censored) trace.stabilized_at = last_touch;
  }
  return trace;
}

std::vector<std::uint64_t> ModifiedInvasion::invaded_sorted() const {
  std::vector<std::uint64_t> out(trace.codes().begin(), trace.codes().end());
  std::sort(out.begin(), out.end());
  return out;
}

ModifiedInvasion modified_invade(const WeightField& field, std::span<const EdgeId> circuit,
                                 std::int64_t budget) {
  if (budget < 0) throw std::invalid_argument("budget must be >= 0");
  const double split = field.split();
  const VertexSet targets = vertices_of(circuit);
  ModifiedInvasion out;
  InvasionEngine engine(field);
  out.trace = InvasionTrace(field.seed());
  out.trace.set_initial(engine.initial_checked());
  if (targets.contains(Vertex{0, 0})) {
    out.reached = true;
    out.reached_at = 0;
  }
  while (engine.steps() < budget) {
    if (out.reached && engine.frontier_min().weight > split) {
      out.frozen = true;
      break;
    }
    const StepView s = engine.step();
    out.trace.append(s);
    if (!out.reached) {
      const EdgeId e = s.edge();
      if (targets.contains(e.base()) || targets.contains(e.head())) {
        out.reached = true;
        out.reached_at = s.index;
      }
    }
  }
  if (!out.frozen && out.reached && engine.frontier_min().weight > split) out.frozen = true;
  out.censored = !out.frozen;
  out.trace.censored = out.censored;
  out.trace.stop_reason = out.frozen ? "frozen" : (out.reached ? "budget exhausted after reaching circuit"
                                                               : "circuit not reached");
  return out;
}

}  // namespace invadelab
