#include "soda/data/sample.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "soda/data/contour.hpp"
#include "soda/data/image_io.hpp"
#include "soda/errors.hpp"
#include "soda/tensor_grid.hpp"

namespace soda::data {

SaliencySample augment(const SaliencySample& s, Augmentation mode) {
  if (mode == Augmentation::none) return s;
  const int64_t dim = mode == Augmentation::hflip ? -1 : -2;
  return {torch::flip(s.image, {dim}), torch::flip(s.gt, {dim}), torch::flip(s.contour, {dim}),
          s.id};
}

SaliencySample prepare(const torch::Tensor& image, const Map2f& gt, std::array<int, 2> size,
                       std::string id) {
  const auto [rows, cols] = size;
  auto resized_gt = resize_map(gt, rows, cols);
  for (auto& v : resized_gt.values()) v = std::clamp(v, 0.0f, 1.0f);
  const auto contour = derive_contour(binarize(resized_gt));
  SaliencySample s;
  s.image = resize_image(image, rows, cols);
  s.gt = to_tensor(resized_gt).unsqueeze(0);
  s.contour = to_tensor(to_float(contour)).unsqueeze(0);
  s.id = std::move(id);
  return s;
}

std::optional<SaliencySample> load_sample(const ManifestEntry& entry, std::array<int, 2> size) {
  try {
    auto image = read_rgb(entry.image);
    auto gt = read_gray(entry.gt);
    auto id = std::filesystem::path(entry.image).stem().string();
    if (entry.aug != Augmentation::none) id += "@" + std::string(to_string(entry.aug));
    return augment(prepare(image, gt, size, std::move(id)), entry.aug);
  } catch (const IoError& e) {
    spdlog::warn("skipping sample: {}", e.what());
    return std::nullopt;
  }
}

std::vector<std::size_t> epoch_order(std::size_t n, uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Batch collate(const std::vector<SaliencySample>& samples) {
  if (samples.empty()) throw ShapeError("collate: empty batch");
  std::vector<torch::Tensor> images, gts, contours;
  Batch b;
  for (const auto& s : samples) {
    images.push_back(s.image);
    gts.push_back(s.gt);
    contours.push_back(s.contour);
    b.ids.push_back(s.id);
  }
  b.image = torch::stack(images);
  b.gt = torch::stack(gts);
  b.contour = torch::stack(contours);
  return b;
}

}  // namespace soda::data
