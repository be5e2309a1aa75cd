#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace soda::model {

/// He-normal initialisation: conv weights ~ N(0, 2 / fan_in) with fan_in the
/// number of inputs feeding one output unit, conv biases zero, normalisation
/// layers reset to the identity affine and fresh running statistics.
void init_weights(torch::nn::Module& module, uint64_t seed);

}  // namespace soda::model
