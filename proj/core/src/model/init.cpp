#include "soda/model/init.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

namespace soda::model {

void init_weights(torch::nn::Module& module, uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (auto& m : module.modules(/*include_self=*/true)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      auto& w = conv->weight;
      const double fan_in = static_cast<double>(w.numel() / w.size(0));
      w.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* bn = m->as<torch::nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
      bn->reset_running_stats();
    } else if (auto* gn = m->as<torch::nn::GroupNorm>()) {
      gn->weight.fill_(1.0);
      gn->bias.zero_();
    }
  }
}

}  // namespace soda::model
