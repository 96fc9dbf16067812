#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "invadelab/lattice.hpp"
#include "invadelab/stats.hpp"
#include "invadelab/union_find.hpp"
#include "invadelab/weights.hpp"

namespace invadelab {

/// Inclusive vertex rectangle [x0, x1] x [y0, y1].
struct Rect {
  std::int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  static Rect of(const Box& b) {
    return {b.center.x - b.radius, b.center.y - b.radius, b.center.x + b.radius, b.center.y + b.radius};
  }
  constexpr bool contains(Vertex v) const { return v.x >= x0 && v.x <= x1 && v.y >= y0 && v.y <= y1; }
  constexpr bool contains(EdgeId e) const { return contains(e.base()) && contains(e.head()); }
  constexpr std::int64_t width() const { return x1 - x0 + 1; }
  constexpr std::int64_t height() const { return y1 - y0 + 1; }
  std::size_t vertex_count() const { return static_cast<std::size_t>(width() * height()); }
  std::uint32_t index(Vertex v) const { return static_cast<std::uint32_t>((v.y - y0) * width() + (v.x - x0)); }
  Vertex vertex(std::uint32_t i) const {
    return {x0 + static_cast<std::int64_t>(i) % width(), y0 + static_cast<std::int64_t>(i) / width()};
  }
};

/// Vertex predicate used to restrict connections.
class Region {
 public:
  static Region all() { return Region(Kind::All); }
  static Region box(Box b) {
    Region r(Kind::Box);
    r.box_ = b;
    return r;
  }
  static Region annulus(Annulus a) {
    Region r(Kind::Annulus);
    r.ann_ = a;
    return r;
  }
  static Region rect(Rect q) {
    Region r(Kind::Rect);
    r.rect_ = q;
    return r;
  }

  bool contains(Vertex v) const {
    switch (kind_) {
      case Kind::All: return true;
      case Kind::Box: return box_.contains(v);
      case Kind::Annulus: return ann_.contains(v);
      case Kind::Rect: return rect_.contains(v);
    }
    return false;
  }
  bool contains(EdgeId e) const { return contains(e.base()) && contains(e.head()); }

 private:
  enum class Kind { All, Box, Annulus, Rect };
  explicit Region(Kind k) : kind_(k) {}
  Kind kind_;
  Box box_{};
  Annulus ann_{};
  Rect rect_{};
};

/// Dense copy of the weights of every edge inside a rectangle.
class SampledWeights {
 public:
  SampledWeights(const WeightField& field, Rect rect);

  const Rect& rect() const { return rect_; }
  // +infinity for edges leaving the rectangle.
  double horizontal(std::uint32_t base_index) const { return h_[base_index]; }
  double vertical(std::uint32_t base_index) const { return v_[base_index]; }
  double weight(EdgeId e) const;

 private:
  Rect rect_;
  std::vector<double> h_;
  std::vector<double> v_;
};

/// Threshold-p labelling of a rectangle (edge open iff weight <= p) with the
/// union-find structure of its open clusters.
class PercSample {
 public:
  PercSample(const WeightField& field, Rect rect, double p);
  PercSample(std::shared_ptr<const SampledWeights> weights, double p);

  double p() const { return p_; }
  const Rect& rect() const { return weights_->rect(); }
  const SampledWeights& weights() const { return *weights_; }
  std::shared_ptr<const SampledWeights> shared_weights() const { return weights_; }

  // False for edges not inside the rectangle.
  bool open(EdgeId e) const;
  bool open_h(std::uint32_t i) const { return bits_[i] & 1U; }
  bool open_v(std::uint32_t i) const { return bits_[i] & 2U; }

  std::uint32_t root(Vertex v) const { return uf_.find(rect().index(v)); }
  bool connected(Vertex a, Vertex b) const { return root(a) == root(b); }
  std::int64_t cluster_size(Vertex v) const { return uf_.component_size(rect().index(v)); }

 private:
  void label();

  std::shared_ptr<const SampledWeights> weights_;
  double p_;
  std::vector<std::uint8_t> bits_;
  mutable UnionFind uf_;
};

/// BFS reachability from A to B over open edges whose endpoints both lie in
/// `region` and in the sample.
bool connection_in_region(const PercSample& s, std::span<const Vertex> a, std::span<const Vertex> b,
                          const Region& region);

/// Open left-right crossing of r: a path inside r from {x0} x [y0, y1] to
/// {x1} x [y0, y1].
bool horizontal_crossing(const PercSample& s, Rect r);

/// Open path from v to the boundary of `box`, staying inside the box.
bool connected_to_boundary(const PercSample& s, Vertex v, Box box);

/// Open circuit around the origin made of edges with both endpoints in the
/// annulus. Decided by planar duality: the face of the origin is separated
/// from infinity.
bool open_circuit_in_annulus(const PercSample& s, Annulus ann);

/// Closed dual circuit around the origin in Ann(m, n)*: dual vertices at
/// (x + 1/2, y + 1/2) lying in B(n) \ B(m) as points of the plane.
bool closed_dual_circuit_in_annulus(const PercSample& s, Annulus ann);

/// Edges of the outermost / innermost open circuit around the origin in the
/// annulus (boundary of the corresponding face), or nullopt if none exists.
std::optional<std::vector<EdgeId>> outermost_open_circuit(const PercSample& s, Annulus ann);
std::optional<std::vector<EdgeId>> innermost_open_circuit(const PercSample& s, Annulus ann);

/// Whether a dual vertex lies in Ann(m, n)* (as a point of the plane).
constexpr bool dual_in_annulus(DualVertex d, Annulus ann) {
  const std::int64_t ax = d.x >= 0 ? 2 * d.x + 1 : -(2 * d.x + 1);
  const std::int64_t ay = d.y >= 0 ? 2 * d.y + 1 : -(2 * d.y + 1);
  const std::int64_t r2 = ax > ay ? ax : ay;  // twice the sup-norm
  return r2 > 2 * ann.inner && r2 <= 2 * ann.outer;
}

/// Components of closed dual edges in a dual annulus with winding voltages,
/// so "a dual path from a* to b* that closes into a circuit around the origin
/// when the dual edge a*b* is added" is an O(1) query.
class DualWindingComponents {
 public:
  DualWindingComponents(const PercSample& s, Annulus ann);

  // Is there a closed dual path P inside the dual annulus, not using `through`,
  // such that P + through winds around the origin? `through` must be the dual
  // of an open edge, so it is not itself part of the closed dual graph.
  bool closes_circuit(DualEdgeId through) const;

 private:
  std::uint32_t id(DualVertex d) const;
  std::pair<std::uint32_t, std::int64_t> find(std::uint32_t x) const;

  Annulus ann_;
  std::int64_t lo_ = 0, side_ = 0;
  mutable std::vector<std::uint32_t> parent_;
  mutable std::vector<std::int64_t> potential_;  // voltage from node to parent
  std::vector<std::uint8_t> wound_;
};

/// Voltage of a dual edge traversed from endpoints()[0] to endpoints()[1]:
/// +1 when it crosses the positive x-axis upwards.
int dual_crossing_voltage(DualEdgeId d);

/// Alternating four-arm event A_n^{2,2} at a fixed edge e, inside B(n).
///
/// Arms use edges with at least one endpoint in B(n-1) (a path stops when it
/// first hits the boundary of B(n)); e and e* are excluded. The event is
/// open_base && open_head && separated; the closed dual arms are reported
/// as a cross-check since separation of two boundary-reaching clusters forces
/// them.
struct ArmReport {
  bool open_base = false;
  bool open_head = false;
  bool separated = false;
  bool closed_dual_low = false;
  bool closed_dual_high = false;
  bool event() const { return open_base && open_head && separated; }
};
ArmReport four_arm(const PercSample& s, EdgeId e, std::int64_t n);

/// Smallest p at which r has an open left-right crossing (minimax path weight).
double crossing_threshold(const SampledWeights& w, Rect r);

// --- Monte Carlo estimators. Trial i uses WeightField(trial_seed(seed0, i)). ---

struct McOptions {
  int workers = 1;
};

/// sigma(n, m, p): left-right open crossing of [0,n] x [0,m].
Estimate crossing_probability(std::int64_t n, std::int64_t m, double p, std::int64_t trials,
                              std::uint64_t seed0, McOptions opt = {});

/// Per-trial crossing thresholds of [0,n] x [0,m]; sigma_hat(p) is the
/// fraction <= p.
std::vector<double> crossing_thresholds(std::int64_t n, std::int64_t m, std::int64_t trials, std::uint64_t seed0,
                                        McOptions opt = {});

struct CorrelationLength {
  std::int64_t length = 0;
  bool straddled = false;    // some decision was taken on the point estimate
  bool censored = false;     // no n up to the cap satisfied the threshold
  std::int64_t trials_used = 0;
};

struct CorrelationOptions {
  McOptions mc{};
  double z = 1.96;               // two-sided 95% band
  std::int64_t max_trials = 0;   // 0 means 16x the initial trials
  std::int64_t max_length = 4096;
};

/// L(p, eps): smallest n with sigma(n,n,p) <= eps (p < 1/2) or >= 1 - eps
/// (p > 1/2), found by doubling then bisection over Monte Carlo estimates.
CorrelationLength correlation_length(double p, double eps, std::int64_t trials, std::uint64_t seed0,
                                     CorrelationOptions opt = {});

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

struct PnQn {
  std::int64_t n = 0;
  double eps = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed0 = 0;
  Bracket p_n;     // bisection bracket on sigma_hat, width <= 2^-12
  Bracket q_n;
  Bracket p_n_ci;  // where sigma_hat -/+ z*se crosses the threshold
  Bracket q_n_ci;
};

/// Approximate inverses of the correlation length at scale n, via bisection
/// in p on sigma_hat(n, n, p) = 1 - eps (above 1/2) and = eps (below 1/2).
PnQn pn_qn(std::int64_t n, double eps, std::int64_t trials, std::uint64_t seed0, McOptions opt = {});

/// pi(p, n): origin connected to the boundary of B(n).
Estimate point_to_boundary(double p, std::int64_t n, std::int64_t trials, std::uint64_t seed0, McOptions opt = {});

/// P(A_n^{2,2}) at threshold p (default p_c) for e = {(0,0), (1,0)}.
Estimate four_arm_probability(std::int64_t n, std::int64_t trials, std::uint64_t seed0, double p = kCriticalP,
                              McOptions opt = {});

}  // namespace invadelab
