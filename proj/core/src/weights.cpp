#include "invadelab/weights.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

namespace invadelab {

namespace {
constexpr std::uint64_t kAuxStreamLow = 0xD1B54A32D192ED03ULL;
constexpr std::uint64_t kAuxStreamHigh = 0x8CB92BA72F3D8DD7ULL;
}  // namespace

std::uint64_t parse_seed(std::string_view text) {
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    text.remove_prefix(2);
    base = 16;
  }
  std::uint64_t value = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value, base);
  if (text.empty() || ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("invalid seed '" + std::string(text) + "': expected decimal or 0x-prefixed hex");
  }
  return value;
}

WeightField WeightField::constant(double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("constant weight must lie in [0,1]");
  WeightField f;
  f.constant_ = w;
  return f;
}

WeightField WeightField::with_overrides(std::span<const std::pair<EdgeId, double>> pins) const {
  auto table = overrides_ ? std::make_shared<std::unordered_map<std::uint64_t, double>>(*overrides_)
                          : std::make_shared<std::unordered_map<std::uint64_t, double>>();
  for (const auto& [e, w] : pins) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("pinned weight must lie in [0,1]");
    (*table)[e.encode()] = w;
  }
  WeightField f = *this;
  f.overrides_ = std::move(table);
  return f;
}

WeightField WeightField::decomposed(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("decomposition threshold must lie in (0,1)");
  WeightField f = *this;
  f.split_ = p;
  return f;
}

Decomposition WeightField::decompose(EdgeId e, double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("decomposition threshold must lie in (0,1)");
  const std::uint64_t code = e.encode();
  const double w = weight_code(code);
  Decomposition d;
  d.eta = w <= p;
  if (d.eta) {
    d.u1 = w;
    const double fresh = to_unit(mix64(seed_ ^ kAuxStreamHigh ^ mix64(code + kAuxStreamLow)));
    // (p, 1]: 1 - fresh lies in (0, 1].
    d.u2 = p + (1.0 - p) * (1.0 - fresh);
    if (d.u2 <= p) d.u2 = std::nextafter(p, 2.0);
  } else {
    d.u2 = w;
    const double fresh = to_unit(mix64(seed_ ^ kAuxStreamLow ^ mix64(code + kAuxStreamHigh)));
    d.u1 = std::fmin(p * fresh, p);
  }
  return d;
}

}  // namespace invadelab
