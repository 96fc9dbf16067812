#include <benchmark/benchmark.h>

#include <random>

#include "invadelab/percolation.hpp"
#include "invadelab/union_find.hpp"

namespace {

using namespace invadelab;

void BM_UnionFindRandom(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(n);
  for (auto& p : pairs) p = {pick(rng), pick(rng)};
  for (auto _ : state) {
    UnionFind uf(n);
    for (auto [a, b] : pairs) uf.unite(a, b);
    benchmark::DoNotOptimize(uf.find(0));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_UnionFindRandom)->Arg(1 << 16)->Arg(1 << 20);

void BM_PercSampleLabel(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    PercSample s(WeightField(seed++), Rect{0, 0, n, n}, kCriticalP);
    benchmark::DoNotOptimize(s.root({0, 0}));
  }
}
BENCHMARK(BM_PercSampleLabel)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_CrossingProbability(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crossing_probability(n + 1, n, kCriticalP, 100, 1));
  }
}
BENCHMARK(BM_CrossingProbability)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_CrossingThreshold(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    const SampledWeights w(WeightField(seed++), Rect{0, 0, n, n});
    benchmark::DoNotOptimize(crossing_threshold(w, w.rect()));
  }
}
BENCHMARK(BM_CrossingThreshold)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace
