#include <random>

#include <benchmark/benchmark.h>

#include "soda/supervision/losses.hpp"
#include "soda/supervision/window_max.hpp"

using namespace soda;

namespace {

Map2f random_mask(int side) {
  std::mt19937 rng(1);
  std::bernoulli_distribution fg(0.2);
  Map2f m(side, side);
  for (auto& v : m.values()) v = fg(rng) ? 1.F : 0.F;
  return m;
}

}  // namespace

static void BM_WindowMax(benchmark::State& state) {
  const auto m = random_mask(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(supervision::window_max(m, 31));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_WindowMax)->Arg(96)->Arg(384);

static void BM_ForegroundWeightBatch(benchmark::State& state) {
  const auto gt = (torch::rand({8, 1, 384, 384}) > 0.7).to(torch::kFloat);
  for (auto _ : state) benchmark::DoNotOptimize(supervision::fg_weight_map(gt));
}
BENCHMARK(BM_ForegroundWeightBatch)->Unit(benchmark::kMillisecond);
