#include "soda/harness/predict.hpp"

#include <algorithm>
#include <vector>

#include <spdlog/spdlog.h>

#include "soda/data/image_io.hpp"
#include "soda/errors.hpp"
#include "soda/model/checkpoint.hpp"
#include "soda/tensor_grid.hpp"

namespace soda::harness {
namespace fs = std::filesystem;

Map2f predict_map(model::SodaNet& net, const torch::Tensor& image, bool negate) {
  if (image.dim() != 3 || image.size(0) != 3) {
    throw ShapeError("predict_map expects a (3,H,W) image");
  }
  const auto [rows, cols] = net->config().input_size;
  torch::NoGradGuard no_grad;
  net->eval();
  const auto input = data::resize_image(image, rows, cols).unsqueeze(0);
  auto logits = model::final_logits(net->forward(input), rows, cols);
  if (negate) logits = -logits;
  const auto map = to_map(torch::sigmoid(logits)[0][0]);
  return data::resize_map(map, static_cast<int>(image.size(1)), static_cast<int>(image.size(2)));
}

PredictStats predict_directory(model::SodaNet& net, const fs::path& images_dir,
                               const fs::path& out_dir) {
  if (!fs::is_directory(images_dir)) throw IoError("not a directory: " + images_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images_dir)) {
    if (e.is_regular_file() && data::is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  fs::create_directories(out_dir);
  PredictStats stats;
  for (const auto& f : files) {
    try {
      const auto map = predict_map(net, data::read_rgb(f));
      data::write_gray_png(out_dir / (f.stem().string() + ".png"), map);
      ++stats.written;
    } catch (const IoError& e) {
      spdlog::warn("skipping {}: {}", f.string(), e.what());
      ++stats.skipped;
    }
  }
  return stats;
}

PredictStats predict(const fs::path& checkpoint, const fs::path& images_dir,
                     const fs::path& out_dir) {
  auto net = model::load_model(checkpoint);
  return predict_directory(net, images_dir, out_dir);
}

}  // namespace soda::harness
