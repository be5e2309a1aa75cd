#include <random>

#include <benchmark/benchmark.h>

#include "soda/metrics/measures.hpp"

using namespace soda;

namespace {

struct Fixture {
  Map2f pred;
  Map2f gt;
};

Fixture make_fixture(int side) {
  std::mt19937 rng(2);
  std::normal_distribution<float> noise(0.F, 0.2F);
  Fixture f{Map2f(side, side), Map2f(side, side)};
  for (int r = side / 4; r < 3 * side / 4; ++r)
    for (int c = side / 5; c < 2 * side / 3; ++c) f.gt(r, c) = 1.F;
  for (std::size_t i = 0; i < f.gt.size(); ++i)
    f.pred.values()[i] = std::clamp(f.gt.values()[i] + noise(rng), 0.F, 1.F);
  return f;
}

}  // namespace

static void BM_FMax(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)));
  const metrics::EvalPair pair{f.pred, f.gt};
  for (auto _ : state) benchmark::DoNotOptimize(metrics::f_max({&pair, 1}));
}
BENCHMARK(BM_FMax)->Arg(384);

static void BM_SMeasure(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::s_measure(f.pred, f.gt));
}
BENCHMARK(BM_SMeasure)->Arg(384);

static void BM_EMeasure(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::e_measure(f.pred, f.gt));
}
BENCHMARK(BM_EMeasure)->Arg(384);

static void BM_WeightedF(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::weighted_f(f.pred, f.gt));
}
BENCHMARK(BM_WeightedF)->Arg(384)->Unit(benchmark::kMillisecond);
