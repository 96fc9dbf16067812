#include "invadelab/stats.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace invadelab {

RatioInterval bootstrap_ratio(std::span<const double> num, std::span<const double> den, int resamples,
                              double level, std::uint64_t seed) {
  if (num.size() != den.size()) throw std::invalid_argument("bootstrap_ratio: size mismatch");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ratio: level must lie in (0,1)");
  RatioInterval out;
  double sn = 0.0, sd = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    sn += num[i];
    sd += den[i];
  }
  if (sd <= 0.0) return out;
  out.defined = true;
  out.ratio = sn / sd;
  out.lo = out.hi = out.ratio;
  if (num.size() < 2 || resamples < 2) return out;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, num.size() - 1);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double bn = 0.0, bd = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) {
      const std::size_t j = pick(rng);
      bn += num[j];
      bd += den[j];
    }
    if (bd > 0.0) stats.push_back(bn / bd);
  }
  if (stats.empty()) return out;
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - level) / 2.0;
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(stats.size() - 1) + 0.5);
    return stats[std::min(idx, stats.size() - 1)];
  };
  out.lo = at(tail);
  out.hi = at(1.0 - tail);
  return out;
}

}  // namespace invadelab
