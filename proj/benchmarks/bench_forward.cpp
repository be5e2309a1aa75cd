#include <benchmark/benchmark.h>

#include "soda/model/init.hpp"
#include "soda/model/network.hpp"
#include "soda/supervision/losses.hpp"

using namespace soda;

static void BM_Forward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  auto cfg = model::preset(model::Variant::small);
  cfg.input_size = {side, side};
  model::SodaNet net(cfg);
  model::init_weights(*net, 1);
  net->eval();
  torch::NoGradGuard guard;
  const auto x = torch::rand({1, 3, side, side});
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(x));
}
BENCHMARK(BM_Forward)->Arg(96)->Arg(192)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  auto cfg = model::preset(model::Variant::small);
  cfg.input_size = {96, 96};
  model::SodaNet net(cfg);
  model::init_weights(*net, 1);
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(1e-3));
  const auto x = torch::rand({static_cast<int64_t>(state.range(0)), 3, 96, 96});
  const auto gt = (torch::rand({x.size(0), 1, 96, 96}) > 0.6).to(torch::kFloat);
  const auto contour = torch::zeros_like(gt);
  for (auto _ : state) {
    opt.zero_grad();
    auto loss = supervision::total_loss(net->forward(x), gt, contour, 0.5);
    loss.objective.backward();
    opt.step();
  }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond)->Iterations(2);
