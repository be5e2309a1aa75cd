#pragma once

#include <torch/torch.h>

#include "soda/grid.hpp"

namespace soda {

/// Copies a 2-D tensor (any float dtype) into a Map2f.
Map2f to_map(const torch::Tensor& plane);
/// (H,W) float32 tensor holding the map values.
torch::Tensor to_tensor(const Map2f& map);

/// Applies `fn` to every trailing (H,W) plane of `t`, returning a tensor with
/// t's shape and dtype.
template <typename Fn>
torch::Tensor map_planes(const torch::Tensor& t, Fn&& fn) {
  const auto h = t.size(-2), w = t.size(-1);
  auto flat = t.detach().to(torch::kCPU, torch::kFloat32).contiguous().reshape({-1, h, w});
  auto out = torch::empty_like(flat);
  for (int64_t i = 0; i < flat.size(0); ++i) out[i].copy_(to_tensor(fn(to_map(flat[i]))));
  return out.reshape(t.sizes()).to(t.options());
}

}  // namespace soda
