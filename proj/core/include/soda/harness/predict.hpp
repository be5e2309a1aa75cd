#pragma once

#include <cstddef>
#include <filesystem>

#include <torch/torch.h>

#include "soda/grid.hpp"
#include "soda/model/network.hpp"

namespace soda::harness {

/// Saliency map of one (3,H,W) image at its native size: resize to the model
/// input, forward, sigmoid of the final head, resize back. `negate` feeds the
/// negated final logits through the sigmoid instead (the background map).
Map2f predict_map(model::SodaNet& net, const torch::Tensor& image, bool negate = false);

struct PredictStats {
  std::size_t written = 0;
  std::size_t skipped = 0;
};

/// Writes "<stem>.png" for every decodable image in `images_dir`; unreadable
/// files are logged and skipped.
PredictStats predict_directory(model::SodaNet& net, const std::filesystem::path& images_dir,
                               const std::filesystem::path& out_dir);
PredictStats predict(const std::filesystem::path& checkpoint,
                     const std::filesystem::path& images_dir,
                     const std::filesystem::path& out_dir);

}  // namespace soda::harness
