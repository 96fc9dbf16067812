#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "invadelab/lattice.hpp"
#include "invadelab/weights.hpp"

namespace invadelab {

struct CheckedEdge {
  std::uint64_t code = 0;
  double weight = 0.0;

  EdgeId edge() const { return EdgeId::decode(code); }
  friend bool operator==(const CheckedEdge&, const CheckedEdge&) = default;
};

/// Frontier key: weight first, then edge code to break (rare) 53-bit ties.
struct FrontierEntry {
  double weight = 0.0;
  std::uint64_t code = 0;

  friend bool operator<(const FrontierEntry& a, const FrontierEntry& b) {
    return a.weight < b.weight || (a.weight == b.weight && a.code < b.code);
  }
  friend bool operator==(const FrontierEntry&, const FrontierEntry&) = default;
};

/// One invasion step. `newly_checked` are the R_n boundary edges exposed by
/// the step (the checked count, not the radius).
struct StepView {
  std::int64_t index = 0;
  std::uint64_t code = 0;
  double weight = 0.0;
  std::span<const CheckedEdge> newly_checked;

  EdgeId edge() const { return EdgeId::decode(code); }
};

/// Serializable engine state; enough to resume an invasion bit-identically.
struct EngineState {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::int64_t checked_total = 0;
  std::vector<std::uint64_t> invaded;   // I_1..I_n in order
  std::vector<std::uint64_t> frontier;  // current boundary, sorted by code

  void write(std::ostream& out) const;
  static EngineState read(std::istream& in);
};

/// Greedy growth from the origin on the infinite lattice.
///
/// The frontier is a binary heap holding exactly the outer edge boundary of
/// the invaded graph: edges enter when first checked and leave only when
/// invaded, since the vertex set never shrinks. Vertex/edge flags live in a
/// square grid centred at the origin that doubles on demand.
class InvasionEngine {
 public:
  explicit InvasionEngine(WeightField field);

  // Rebuilds an engine from a checkpoint. The field must be the one the state
  // was produced with; weights are recomputed from it.
  static InvasionEngine restore(WeightField field, const EngineState& state);

  StepView step();

  std::int64_t steps() const { return step_; }
  std::int64_t checked_total() const { return checked_total_; }
  std::span<const CheckedEdge> initial_checked() const { return initial_; }
  std::span<const std::uint64_t> invaded() const { return invaded_; }
  std::size_t frontier_size() const { return heap_.size(); }
  const FrontierEntry& frontier_min() const { return heap_.front(); }
  std::vector<FrontierEntry> frontier_snapshot() const;
  const WeightField& field() const { return field_; }

  bool vertex_invaded(Vertex v) const;
  bool edge_checked(EdgeId e) const;
  bool edge_invaded(EdgeId e) const;
  // R_n: smallest k with every invaded edge inside B(k).
  std::int64_t radius() const { return radius_; }
  // Half-width of the flag grid (diagnostics / memory accounting).
  std::int64_t grid_half_width() const { return half_; }

  EngineState save() const;

 private:
  static constexpr std::uint8_t kVertexInvaded = 1;
  static constexpr std::uint8_t kHorizontalChecked = 2;
  static constexpr std::uint8_t kVerticalChecked = 4;
  static constexpr std::uint8_t kHorizontalInvaded = 8;
  static constexpr std::uint8_t kVerticalInvaded = 16;

  std::size_t index(std::int64_t x, std::int64_t y) const {
    return static_cast<std::size_t>((x + half_) * side_ + (y + half_));
  }
  std::uint8_t flags(std::int64_t x, std::int64_t y) const;
  void ensure_fits(std::int64_t x, std::int64_t y);
  void grow(std::int64_t needed);
  void check_edge(std::int64_t bx, std::int64_t by, Orient o);
  void absorb_vertex(std::int64_t x, std::int64_t y);
  void push(FrontierEntry entry);
  FrontierEntry pop();

  WeightField field_;
  std::int64_t half_ = 0;
  std::int64_t side_ = 0;
  std::vector<std::uint8_t> grid_;
  std::vector<FrontierEntry> heap_;
  std::vector<CheckedEdge> initial_;
  std::vector<CheckedEdge> scratch_;
  std::vector<std::uint64_t> invaded_;
  std::int64_t step_ = 0;
  std::int64_t checked_total_ = 0;
  std::int64_t radius_ = 0;
};

/// Complete record of an invasion: step-0 checked edges plus per-step
/// invaded edge, weight and newly checked edges (CSR layout).
class InvasionTrace {
 public:
  InvasionTrace() = default;
  explicit InvasionTrace(std::uint64_t seed) : seed_(seed) {}

  struct Step {
    std::int64_t index;
    std::uint64_t code;
    double weight;
    std::span<const CheckedEdge> newly_checked;
    EdgeId edge() const { return EdgeId::decode(code); }
  };

  void set_initial(std::span<const CheckedEdge> initial);
  void append(const StepView& s);

  std::uint64_t seed() const { return seed_; }
  std::int64_t size() const { return static_cast<std::int64_t>(codes_.size()); }
  bool empty() const { return codes_.empty(); }
  // 1-based, matching I_n.
  Step step(std::int64_t n) const;
  std::uint64_t code(std::int64_t n) const { return codes_[static_cast<std::size_t>(n - 1)]; }
  double weight(std::int64_t n) const { return weights_[static_cast<std::size_t>(n - 1)]; }
  std::span<const std::uint64_t> codes() const { return codes_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const CheckedEdge> initial_checked() const;
  // v_1..v_{L_n}: every edge checked through step n, in checking order.
  std::span<const CheckedEdge> checked_through(std::int64_t n) const;
  std::int64_t checked_total(std::int64_t n) const;

  // Order-sensitive digest of everything in the trace.
  std::uint64_t hash() const;

  // Stop-rule outcome.
  bool censored = false;
  std::string stop_reason;
  // Step at which a BoxStabilized rule certified the box (last step touching it).
  std::optional<std::int64_t> stabilized_at;

  void write_binary(std::ostream& out) const;
  static InvasionTrace read_binary(std::istream& in);
  // Columns: index,x,y,orient,weight,n_new_checked
  void write_csv(std::ostream& out) const;

 private:
  std::uint64_t seed_ = 0;
  std::size_t initial_count_ = 0;
  std::vector<std::uint64_t> codes_;
  std::vector<double> weights_;
  std::vector<CheckedEdge> checked_;
  std::vector<std::uint32_t> offsets_{0};  // into checked_ after the initial block
};

inline constexpr const char* kTraceCsvHeader = "index,x,y,orient,weight,n_new_checked";

/// Radius multiple at which a box is treated as settled ("connected to
/// infinity" is truncated to this scale throughout).
inline constexpr std::int64_t kStabilizationFactor = 8;

struct StopSteps {
  std::int64_t n = 0;
};
// Fires when an invaded edge leaves B(k-1).
struct StopRadiusReached {
  std::int64_t k = 1;
  std::int64_t budget = std::int64_t{1} << 40;
};
// Fires when the invasion radius reaches kStabilizationFactor * k; censored if
// `horizon` steps pass first.
struct StopBoxStabilized {
  std::int64_t k = 1;
  std::int64_t horizon = 0;
};
using StopRule = std::variant<StopSteps, StopRadiusReached, StopBoxStabilized>;

void validate(const StopRule& rule);

InvasionTrace invade_until(const WeightField& field, const StopRule& rule);

struct ModifiedInvasion {
  InvasionTrace trace;
  bool reached = false;           // a vertex of the circuit was invaded
  std::int64_t reached_at = -1;   // step at which that happened
  bool frozen = false;            // eta = 1 frontier emptied afterwards
  bool censored = true;           // budget ran out before freezing
  std::vector<std::uint64_t> invaded_sorted() const;
};

/// Ordinary invasion until the circuit is touched, then only edges with
/// eta = 1 (omega <= split) are invaded; freezes when none remain on the
/// frontier.
ModifiedInvasion modified_invade(const WeightField& field, std::span<const EdgeId> circuit,
                                 std::int64_t budget);

}  // namespace invadelab
