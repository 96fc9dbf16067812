#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <utility>

#include "invadelab/lattice.hpp"

namespace invadelab {

/// Stafford "mix13" 64-bit finalizer (the splitmix64 output function).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Two-argument mix used for per-trial seed derivation.
constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x632BE59BD9B4E019ULL));
}

/// Top 53 bits as a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

/// Accepts decimal ("12345") or hexadecimal ("0x3039"); throws std::invalid_argument.
std::uint64_t parse_seed(std::string_view text);

inline constexpr double kCriticalP = 0.5;

struct Decomposition {
  bool eta = false;  // [omega <= p]
  double u1 = 0.0;   // uniform on [0, p]
  double u2 = 0.0;   // uniform on (p, 1]

  double reconstruct() const { return eta ? u1 : u2; }
};

/// I.i.d. uniform edge weights, evaluated lazily from (seed, edge code).
///
/// Besides the hashed field there are two fixture modes used by tests and by
/// degenerate examples: a constant field and explicit per-edge overrides.
class WeightField {
 public:
  WeightField() = default;
  explicit WeightField(std::uint64_t seed) : seed_(seed) {}

  static WeightField constant(double w);

  // Copy of this field with the given edges pinned to fixed weights.
  WeightField with_overrides(std::span<const std::pair<EdgeId, double>> pins) const;

  // Same weights; records the threshold used by decompose().
  WeightField decomposed(double p) const;

  std::uint64_t seed() const { return seed_; }
  bool is_decomposed() const { return split_.has_value(); }
  double split() const { return split_.value_or(kCriticalP); }
  bool is_constant() const { return constant_.has_value(); }
  bool has_overrides() const { return overrides_ != nullptr; }

  double weight(EdgeId e) const { return weight_code(e.encode()); }

  double weight_code(std::uint64_t code) const {
    if (overrides_) [[unlikely]] {
      if (auto it = overrides_->find(code); it != overrides_->end()) return it->second;
    }
    if (constant_) [[unlikely]] return *constant_;
    return to_unit(mix64(seed_ ^ mix64(code + 0x9E3779B97F4A7C15ULL)));
  }

  bool open(EdgeId e, double p) const { return weight(e) <= p; }

  // (eta, u1, u2) representation at threshold p; the fresh uniforms come from
  // a domain-separated stream so they are independent of omega.
  Decomposition decompose(EdgeId e, double p) const;
  Decomposition decompose(EdgeId e) const { return decompose(e, split()); }

 private:
  std::uint64_t seed_ = 0;
  std::optional<double> constant_;
  std::optional<double> split_;
  std::shared_ptr<const std::unordered_map<std::uint64_t, double>> overrides_;
};

}  // namespace invadelab
