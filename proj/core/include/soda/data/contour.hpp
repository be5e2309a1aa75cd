#pragma once

#include <torch/torch.h>

#include "soda/grid.hpp"

namespace soda::data {

/// 1 where value >= threshold.
Mask2u8 binarize(const Map2f& map, float threshold = 0.5f);
Map2f to_float(const Mask2u8& mask);

/// 3x3 binary dilation / erosion with replicate borders.
Mask2u8 dilate3x3(const Mask2u8& mask);
Mask2u8 erode3x3(const Mask2u8& mask);

/// Morphological gradient: dilate(gt) XOR erode(gt). A two-pixel band
/// straddling every foreground boundary.
Mask2u8 derive_contour(const Mask2u8& gt);

/// Plane-wise contour of a (..., H, W) tensor holding 0/1 values.
torch::Tensor derive_contour(const torch::Tensor& binary_gt);

}  // namespace soda::data
