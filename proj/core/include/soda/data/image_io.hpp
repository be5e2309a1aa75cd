#pragma once

#include <cstdint>
#include <filesystem>

#include <torch/torch.h>

#include "soda/grid.hpp"

namespace soda::data {

/// (3,H,W) float32 RGB in [0,1]. Throws IoError when the file cannot be decoded.
torch::Tensor read_rgb(const std::filesystem::path& path);
/// Single-channel map in [0,1] (8-bit files are divided by 255).
Map2f read_gray(const std::filesystem::path& path);

/// round(clamp(v,0,1) * 255).
uint8_t quantize(float v);
void write_gray_png(const std::filesystem::path& path, const Map2f& map);
void write_mask_png(const std::filesystem::path& path, const Mask2u8& mask);
/// (3,H,W) tensor in [0,1] written as an 8-bit RGB image.
void write_rgb_png(const std::filesystem::path& path, const torch::Tensor& chw);

/// Bilinear resize (half-pixel centres). Identity when the size already matches.
Map2f resize_map(const Map2f& map, int rows, int cols);
torch::Tensor resize_image(const torch::Tensor& chw, int rows, int cols);

bool is_image_file(const std::filesystem::path& path);

}  // namespace soda::data
