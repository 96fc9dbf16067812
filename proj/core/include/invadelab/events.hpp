#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "invadelab/lattice.hpp"
#include "invadelab/manifest.hpp"
#include "invadelab/percolation.hpp"
#include "invadelab/weights.hpp"

namespace invadelab {

// Composite events built from percolation primitives. "Connected to
// infinity" is truncated to the boundary of B(M) throughout.

/// Radii r0 < r1 < r2 < r3 < r4 of D_{k,m}: 2^{k+1}, 2^{k+1+m/8},
/// 2^{k+1+m/4}, 2^{k+1+m/2}, 2^{k+1+m}, each rounded to the nearest integer
/// and forced to be at least the previous radius + 1.
struct DkmRadii {
  std::array<std::int64_t, 5> r{};
  static DkmRadii dyadic(int k, int m);
};

struct DkmReport {
  DkmRadii radii;
  double p_hat = 0.0;
  std::int64_t truncation = 0;
  bool open_inner = false;         // (i) p_c-open circuit in Ann(r0, r1)
  bool closed_dual = false;        // (ii) p_hat-closed dual circuit in Ann(r1, r2)*
  bool open_outer = false;         // (iii) p_c-open circuit in Ann(r3, r4)
  bool outer_to_infinity = false;  // (iv) outermost (iii) circuit p_hat-connected to the boundary of B(M)
  bool event() const { return open_inner && closed_dual && open_outer && outer_to_infinity; }
};

/// p_hat is p_{r2} from the manifest. M defaults to kStabilizationFactor * r4.
DkmReport detect_event_Dkm(const WeightField& field, int k, int m, const ThresholdManifest& manifest,
                           const ManifestKey& key, std::int64_t truncation = 0);
/// Same conditions for explicit radii and threshold (used by oracle tests).
DkmReport detect_event_Dkm(const WeightField& field, const DkmRadii& radii, double p_hat, std::int64_t truncation);

struct DnReport {
  std::int64_t n = 0;
  double q_hat = 0.0;
  bool inner_circuit = false;   // 1: q_n-open circuit in Ann(n, 2n)
  bool dual_gap = false;        // 2(a) holds for some candidate f
  bool bridge = false;          // 2(a) and 2(b) hold for the same f
  bool outer_circuit = false;   // 3: p_c-open circuit in Ann(8n, 16n)
  bool event() const { return inner_circuit && bridge && outer_circuit; }

  std::vector<EdgeId> c_star;   // innermost q_n-open circuit in Ann(n, 2n)
  std::vector<EdgeId> d_star;   // outermost p_c-open circuit in Ann(8n, 16n)
  std::optional<EdgeId> f;      // smallest-code edge satisfying condition 2
};

/// D(n). Paths of condition 2(b) live in B(16n); `avoid` excludes an edge e
/// from the inner connection (the D^e(n) variant).
DnReport detect_event_Dn(const WeightField& field, std::int64_t n, double q_hat,
                         std::optional<EdgeId> avoid = std::nullopt);
DnReport detect_event_Dn(const WeightField& field, std::int64_t n, const ThresholdManifest& manifest,
                         const ManifestKey& key, std::optional<EdgeId> avoid = std::nullopt);

/// D^e_int(n, D^): conditions 1 and 2 with the outer path ending on D^.
bool detect_event_Dn_int(const WeightField& field, std::int64_t n, double q_hat, std::span<const EdgeId> d_hat,
                         std::optional<EdgeId> avoid = std::nullopt);
/// D_ext(n, D^): D^ is the outermost p_c-open circuit in Ann(8n, 16n) and is
/// p_c-connected to the boundary of B(16n).
bool detect_event_Dn_ext(const WeightField& field, std::int64_t n, std::span<const EdgeId> d_hat);

struct LkReport {
  bool inner_circuit = false;  // (a) p_c-open circuit in Ann(2^{k-2}, 2^{k-1})
  bool closed_dual = false;    // (b) (p_c + eps)-closed dual circuit in Ann(2^{k+2}, 2^{k+3})*
  bool connected = false;      // (c) that circuit p_c-connected to an endpoint of e inside B(2^k)
  bool event() const { return inner_circuit && closed_dual && connected; }
};

/// L_k(e) for e inside Ann(2^{k-1}, 2^k); requires k >= 2.
LkReport detect_event_Lk(const WeightField& field, int k, EdgeId e, double eps);

/// Y_n: edges inside Ann(2n, 4n) with weight > p_c having an endpoint
/// q_n-connected to the boundary of B(n) inside B(4n).
std::int64_t count_Y(const WeightField& field, std::int64_t n, double q_hat);
/// Z(D^): edges outside B(16n) (both endpoints) with weight < p_c that are
/// p_c-connected to D^ inside B(M).
std::int64_t count_Z(const WeightField& field, std::int64_t n, std::span<const EdgeId> d_hat, std::int64_t truncation);
/// Z_n(l): vertices of Ann(2^l n, 2^{l+1} n) p_c-connected to the boundary
/// of B(16n) inside B(M); M defaults to 2^{l+2} n.
std::int64_t count_Z_ell(const WeightField& field, std::int64_t n, int ell, std::int64_t truncation = 0);

struct ExteriorCounts {
  std::int64_t y = 0;
  bool has_circuit = false;  // outermost p_c-open circuit in Ann(8n, 16n) exists
  std::int64_t z_circuit = 0;
  std::int64_t z_ell = 0;
};

/// All three counts, with D^ taken as the outermost p_c-open circuit in
/// Ann(8n, 16n) (z_circuit = 0 when none exists).
ExteriorCounts exterior_counts(const WeightField& field, std::int64_t n, int ell, double q_hat,
                               std::int64_t truncation);

}  // namespace invadelab
