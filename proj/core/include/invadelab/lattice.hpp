#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

namespace invadelab {

// Coordinates of every vertex, edge base and dual vertex must satisfy
// |x|, |y| < kCoordLimit so that edge codes stay bijective.
inline constexpr std::int64_t kCoordLimit = std::int64_t{1} << 30;

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct Vertex {
  std::int64_t x = 0;
  std::int64_t y = 0;

  friend constexpr auto operator<=>(const Vertex&, const Vertex&) = default;
  constexpr Vertex operator+(const Vertex& o) const { return {x + o.x, y + o.y}; }
  constexpr Vertex operator-(const Vertex& o) const { return {x - o.x, y - o.y}; }
};

// Sup-norm |v|_inf = max(|x|,|y|); v is in B(n) iff norm(v) <= n.
constexpr std::int64_t norm_inf(Vertex v) {
  const std::int64_t ax = v.x < 0 ? -v.x : v.x;
  const std::int64_t ay = v.y < 0 ? -v.y : v.y;
  return ax > ay ? ax : ay;
}

constexpr bool in_coord_range(Vertex v) {
  return v.x > -kCoordLimit && v.x < kCoordLimit && v.y > -kCoordLimit && v.y < kCoordLimit;
}

void check_coord_range(Vertex v);

enum class Orient : std::uint8_t { Horizontal = 0, Vertical = 1 };

/// Nearest-neighbour bond of Z^2, stored by its lexicographically smaller
/// endpoint. The 64-bit code packs (x + 2^30, y + 2^30, orient) so that code
/// order equals (x, y, orient) order.
class EdgeId {
 public:
  constexpr EdgeId() = default;
  constexpr EdgeId(Vertex base, Orient orient) : base_(base), orient_(orient) {}

  static EdgeId horizontal(std::int64_t x, std::int64_t y) { return {{x, y}, Orient::Horizontal}; }
  static EdgeId vertical(std::int64_t x, std::int64_t y) { return {{x, y}, Orient::Vertical}; }

  // Edge joining two nearest neighbours; throws std::invalid_argument otherwise.
  static EdgeId between(Vertex a, Vertex b);

  constexpr Vertex base() const { return base_; }
  constexpr Orient orient() const { return orient_; }
  constexpr Vertex head() const {
    return orient_ == Orient::Horizontal ? Vertex{base_.x + 1, base_.y} : Vertex{base_.x, base_.y + 1};
  }
  constexpr std::array<Vertex, 2> endpoints() const { return {base_, head()}; }
  constexpr bool touches(Vertex v) const { return v == base_ || v == head(); }

  std::uint64_t encode() const;
  static EdgeId decode(std::uint64_t code);

  friend constexpr auto operator<=>(const EdgeId&, const EdgeId&) = default;

 private:
  Vertex base_{};
  Orient orient_ = Orient::Horizontal;
};

// Inline fast path used by the invasion hot loop; no range check.
inline constexpr std::uint64_t encode_unchecked(std::int64_t x, std::int64_t y, Orient o) {
  return (static_cast<std::uint64_t>(x + kCoordLimit) << 32) |
         (static_cast<std::uint64_t>(y + kCoordLimit) << 1) | static_cast<std::uint64_t>(o);
}

/// Dual vertex (x + 1/2, y + 1/2), stored by its integer corner (x, y).
struct DualVertex {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend constexpr auto operator<=>(const DualVertex&, const DualVertex&) = default;
};

/// The unique dual bond bisecting a primal bond.
class DualEdgeId {
 public:
  constexpr DualEdgeId() = default;
  constexpr explicit DualEdgeId(EdgeId primal) : primal_(primal) {}

  // Dual bond joining two neighbouring dual vertices.
  static DualEdgeId between(DualVertex a, DualVertex b);

  constexpr EdgeId primal() const { return primal_; }
  // A horizontal primal bond is crossed by a vertical dual bond and vice versa.
  constexpr Orient orient() const {
    return primal_.orient() == Orient::Horizontal ? Orient::Vertical : Orient::Horizontal;
  }
  // Lower/left endpoint first.
  std::array<DualVertex, 2> endpoints() const;

  friend constexpr auto operator<=>(const DualEdgeId&, const DualEdgeId&) = default;

 private:
  EdgeId primal_{};
};

inline DualEdgeId dual(EdgeId e) { return DualEdgeId{e}; }
inline EdgeId primal(DualEdgeId d) { return d.primal(); }

/// Incident edge and opposite endpoint, in the fixed order E, N, W, S.
struct Incidence {
  EdgeId edge;
  Vertex other;
};
std::array<Incidence, 4> neighbors(Vertex v);

/// B(v, n) = v + [-n, n]^2.
struct Box {
  std::int64_t radius = 0;
  Vertex center{};

  constexpr bool contains(Vertex v) const { return norm_inf(v - center) <= radius; }
  constexpr bool contains(EdgeId e) const { return contains(e.base()) && contains(e.head()); }
  // Vertices of the box with a nearest neighbour outside it.
  constexpr bool on_boundary(Vertex v) const { return norm_inf(v - center) == radius; }
};

/// Ann(m, n) = B(n) \ B(m), centred at the origin.
struct Annulus {
  std::int64_t inner = 0;
  std::int64_t outer = 1;

  constexpr bool contains(Vertex v) const {
    const auto r = norm_inf(v);
    return r > inner && r <= outer;
  }
  constexpr bool contains(EdgeId e) const { return contains(e.base()) && contains(e.head()); }
  void validate() const;
};

struct VertexHash {
  std::size_t operator()(Vertex v) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(v.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(v.y) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};
struct EdgeHash {
  std::size_t operator()(EdgeId e) const noexcept { return std::hash<std::uint64_t>{}(e.encode()); }
};

using VertexSet = std::unordered_set<Vertex, VertexHash>;
using EdgeSet = std::unordered_set<EdgeId, EdgeHash>;

/// Outer edge boundary: edges not in `edges` with at least one endpoint in
/// `cluster`. Requires `edges` to be induced on `cluster`.
EdgeSet outer_boundary(const VertexSet& cluster, const EdgeSet& edges);

/// Vertex set of an edge set.
VertexSet vertices_of(std::span<const EdgeId> edges);

}  // namespace invadelab
