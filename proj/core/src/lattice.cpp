#include "invadelab/lattice.hpp"

#include <string>

namespace invadelab {

void check_coord_range(Vertex v) {
  if (!in_coord_range(v)) {
    throw RangeError("coordinate (" + std::to_string(v.x) + "," + std::to_string(v.y) +
                     ") outside supported range |x|,|y| < 2^30");
  }
}

EdgeId EdgeId::between(Vertex a, Vertex b) {
  if (b < a) std::swap(a, b);
  if (a.y == b.y && b.x == a.x + 1) return {a, Orient::Horizontal};
  if (a.x == b.x && b.y == a.y + 1) return {a, Orient::Vertical};
  throw std::invalid_argument("vertices are not nearest neighbours");
}

std::uint64_t EdgeId::encode() const {
  check_coord_range(base_);
  check_coord_range(head());
  return encode_unchecked(base_.x, base_.y, orient_);
}

EdgeId EdgeId::decode(std::uint64_t code) {
  const auto orient = static_cast<Orient>(code & 1U);
  const auto uy = static_cast<std::int64_t>((code >> 1) & 0x7FFFFFFFULL);
  const auto ux = static_cast<std::int64_t>(code >> 32);
  if (ux > 0x7FFFFFFF) throw RangeError("edge code out of range");
  return {{ux - kCoordLimit, uy - kCoordLimit}, orient};
}

DualEdgeId DualEdgeId::between(DualVertex a, DualVertex b) {
  if (b < a) std::swap(a, b);
  if (a.x == b.x && b.y == a.y + 1) return DualEdgeId{EdgeId::horizontal(a.x, b.y)};
  if (a.y == b.y && b.x == a.x + 1) return DualEdgeId{EdgeId::vertical(b.x, a.y)};
  throw std::invalid_argument("dual vertices are not nearest neighbours");
}

std::array<DualVertex, 2> DualEdgeId::endpoints() const {
  const Vertex b = primal_.base();
  if (primal_.orient() == Orient::Horizontal) return {DualVertex{b.x, b.y - 1}, DualVertex{b.x, b.y}};
  return {DualVertex{b.x - 1, b.y}, DualVertex{b.x, b.y}};
}

std::array<Incidence, 4> neighbors(Vertex v) {
  check_coord_range(v);
  const Vertex e{v.x + 1, v.y}, n{v.x, v.y + 1}, w{v.x - 1, v.y}, s{v.x, v.y - 1};
  check_coord_range(e);
  check_coord_range(n);
  check_coord_range(w);
  check_coord_range(s);
  return {Incidence{EdgeId{v, Orient::Horizontal}, e}, Incidence{EdgeId{v, Orient::Vertical}, n},
          Incidence{EdgeId{w, Orient::Horizontal}, w}, Incidence{EdgeId{s, Orient::Vertical}, s}};
}

void Annulus::validate() const {
  if (inner < 0 || outer <= inner) {
    throw std::invalid_argument("annulus requires 0 <= inner < outer");
  }
}

EdgeSet outer_boundary(const VertexSet& cluster, const EdgeSet& edges) {
  EdgeSet out;
  for (const Vertex& v : cluster) {
    for (const auto& inc : neighbors(v)) {
      if (!edges.contains(inc.edge)) out.insert(inc.edge);
    }
  }
  return out;
}

VertexSet vertices_of(std::span<const EdgeId> edges) {
  VertexSet vs;
  for (const EdgeId& e : edges) {
    vs.insert(e.base());
    vs.insert(e.head());
  }
  return vs;
}

}  // namespace invadelab
