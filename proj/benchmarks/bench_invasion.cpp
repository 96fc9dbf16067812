#include <benchmark/benchmark.h>

#include "invadelab/invasion.hpp"
#include "invadelab/observables.hpp"
#include "invadelab/weights.hpp"

namespace {

using namespace invadelab;

void BM_WeightCode(benchmark::State& state) {
  const WeightField field(7);
  std::uint64_t code = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(field.weight_code(code++));
  }
}
BENCHMARK(BM_WeightCode);

void BM_InvasionSteps(benchmark::State& state) {
  const std::int64_t steps = state.range(0);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    InvasionEngine engine(WeightField(seed++));
    while (engine.steps() < steps) benchmark::DoNotOptimize(engine.step().weight);
  }
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_InvasionSteps)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_ProfileRun(benchmark::State& state) {
  const std::vector<std::int64_t> horizons = {state.range(0)};
  const BinSpec bins = BinSpec::uniform(0.01);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(profile_run(WeightField(seed++), horizons, bins));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ProfileRun)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
