#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "soda/data/manifest.hpp"
#include "soda/grid.hpp"

namespace soda::data {

/// One training/evaluation unit. image (3,H,W) in [0,1]; gt (1,H,W) in [0,1];
/// contour (1,H,W) in {0,1}.
struct SaliencySample {
  torch::Tensor image;
  torch::Tensor gt;
  torch::Tensor contour;
  std::string id;
};

/// Same flip applied to image, ground truth and contour.
SaliencySample augment(const SaliencySample& sample, Augmentation mode);

/// Resizes image and ground truth to `size` (rows, cols) bilinearly, clamps the
/// ground truth to [0,1] and re-derives the contour from the resized,
/// binarized ground truth.
SaliencySample prepare(const torch::Tensor& image, const Map2f& gt, std::array<int, 2> size,
                       std::string id = {});

/// Decodes, prepares and augments one manifest entry. Returns nullopt (and
/// logs) when a file is missing or corrupt.
std::optional<SaliencySample> load_sample(const ManifestEntry& entry, std::array<int, 2> size);

class SampleSource {
public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::optional<SaliencySample> get(std::size_t index) const = 0;
};

class ManifestSource final : public SampleSource {
public:
  ManifestSource(DatasetManifest manifest, std::array<int, 2> size)
      : manifest_(std::move(manifest)), size_(size) {}
  std::size_t size() const override { return manifest_.entries.size(); }
  std::optional<SaliencySample> get(std::size_t index) const override {
    return load_sample(manifest_.entries.at(index), size_);
  }
  const DatasetManifest& manifest() const { return manifest_; }

private:
  DatasetManifest manifest_;
  std::array<int, 2> size_;
};

class InMemorySource final : public SampleSource {
public:
  explicit InMemorySource(std::vector<SaliencySample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  std::optional<SaliencySample> get(std::size_t index) const override {
    return samples_.at(index);
  }

private:
  std::vector<SaliencySample> samples_;
};

/// Deterministic permutation of [0, n) for a given seed and epoch.
std::vector<std::size_t> epoch_order(std::size_t n, uint64_t seed, int epoch);

struct Batch {
  torch::Tensor image;    // (B,3,H,W)
  torch::Tensor gt;       // (B,1,H,W)
  torch::Tensor contour;  // (B,1,H,W)
  std::vector<std::string> ids;
};

Batch collate(const std::vector<SaliencySample>& samples);

}  // namespace soda::data
