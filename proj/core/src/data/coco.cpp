#include "soda/data/coco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "soda/data/contour.hpp"
#include "soda/data/image_io.hpp"
#include "soda/errors.hpp"

namespace soda::data {

std::vector<uint32_t> decode_rle_counts(std::string_view s) {
  // Each count is a little-endian base-32 varint offset by 48 ('0'); the
  // sixth bit marks continuation and the fifth bit of the last chunk is the
  // sign. From the third count on, values are deltas against count[i-2].
  std::vector<int64_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw std::invalid_argument("truncated RLE string");
      const int64_t c = static_cast<int64_t>(s[p]) - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -(int64_t{1} << (5 * k));
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    counts.push_back(x);
  }
  std::vector<uint32_t> out;
  out.reserve(counts.size());
  for (auto c : counts) {
    if (c < 0) throw std::invalid_argument("negative run length in RLE string");
    out.push_back(static_cast<uint32_t>(c));
  }
  return out;
}

Mask2u8 decode_rle(const Rle& rle) {
  const uint64_t total = static_cast<uint64_t>(rle.height) * rle.width;
  const uint64_t sum = std::accumulate(rle.counts.begin(), rle.counts.end(), uint64_t{0});
  if (sum != total) throw std::invalid_argument("RLE run lengths do not cover the mask");
  Mask2u8 mask(rle.height, rle.width);
  uint64_t k = 0;
  unsigned char value = 0;
  for (uint32_t run : rle.counts) {
    for (uint32_t i = 0; i < run; ++i, ++k) {
      if (value) mask(static_cast<int>(k % rle.height), static_cast<int>(k / rle.height)) = 1;
    }
    value ^= 1;
  }
  return mask;
}

double polygon_area2(const Polygon& poly) {
  const std::size_t n = poly.xy.size() / 2;
  double a = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    a += poly.xy[2 * i] * poly.xy[2 * j + 1] - poly.xy[2 * j] * poly.xy[2 * i + 1];
  }
  return a;
}

void rasterize_polygon(const Polygon& poly, Mask2u8& mask) {
  const std::size_t n = poly.xy.size() / 2;
  if (n < 3) return;
  std::vector<double> xs;
  for (int r = 0; r < mask.rows(); ++r) {
    const double y = r + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      const double xi = poly.xy[2 * i], yi = poly.xy[2 * i + 1];
      const double xj = poly.xy[2 * j], yj = poly.xy[2 * j + 1];
      if ((yi > y) != (yj > y)) xs.push_back(xi + (y - yi) * (xj - xi) / (yj - yi));
    }
    std::sort(xs.begin(), xs.end());
    // Pixel centre c + 0.5 is inside when it lies in [xs[2k], xs[2k+1]).
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int lo = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int hi = std::min(mask.cols(), static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
      for (int c = lo; c < hi; ++c) mask(r, c) = 1;
    }
  }
}

BinarizedMask binarize_coco(const std::vector<Segmentation>& segments, int height, int width) {
  BinarizedMask out{Mask2u8(height, width), 0, 0};
  for (const auto& seg : segments) {
    bool contributed = false;
    for (const auto& poly : seg.polygons) {
      if (poly.xy.size() < 6 || poly.xy.size() % 2 != 0 || polygon_area2(poly) == 0.0) {
        ++out.skipped;
        continue;
      }
      rasterize_polygon(poly, out.gt);
      contributed = true;
    }
    if (seg.rle) {
      try {
        if (seg.rle->height != height || seg.rle->width != width)
          throw std::invalid_argument("RLE size differs from image size");
        const auto m = decode_rle(*seg.rle);
        auto dst = out.gt.values();
        auto src = m.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
        contributed = true;
      } catch (const std::invalid_argument&) {
        ++out.skipped;
      }
    }
    if (contributed) ++out.valid_segments;
  }
  return out;
}

std::vector<CocoImage> parse_coco(const nlohmann::json& doc) {
  std::map<int64_t, CocoImage> images;
  for (const auto& img : doc.at("images")) {
    CocoImage ci;
    ci.id = img.at("id").get<int64_t>();
    ci.file_name = img.at("file_name").get<std::string>();
    ci.width = img.at("width").get<int>();
    ci.height = img.at("height").get<int>();
    images.emplace(ci.id, std::move(ci));
  }
  if (doc.contains("annotations")) {
    for (const auto& ann : doc.at("annotations")) {
      auto it = images.find(ann.at("image_id").get<int64_t>());
      if (it == images.end() || !ann.contains("segmentation")) continue;
      const auto& seg = ann.at("segmentation");
      Segmentation s;
      if (seg.is_array()) {
        for (const auto& part : seg) s.polygons.push_back({part.get<std::vector<double>>()});
      } else if (seg.is_object()) {
        Rle rle;
        const auto size = seg.at("size");
        rle.height = size.at(0).get<int>();
        rle.width = size.at(1).get<int>();
        const auto& counts = seg.at("counts");
        try {
          rle.counts = counts.is_string() ? decode_rle_counts(counts.get<std::string>())
                                          : counts.get<std::vector<uint32_t>>();
        } catch (const std::invalid_argument&) {
          rle.counts.clear();  // fails coverage check later, counted as skipped
        }
        s.rle = std::move(rle);
      }
      it->second.segments.push_back(std::move(s));
    }
  }
  std::vector<CocoImage> out;
  out.reserve(images.size());
  for (auto& [_, img] : images) out.push_back(std::move(img));
  return out;
}

DatasetManifest build_coco(const std::filesystem::path& annotations,
                           const std::filesystem::path& images_dir,
                           const std::filesystem::path& out_dir, CocoBuildStats* stats) {
  std::ifstream in(annotations);
  if (!in) throw IoError("cannot open annotations " + annotations.string());
  const auto doc = nlohmann::json::parse(in);
  const auto images = parse_coco(doc);

  CocoBuildStats local;
  std::vector<ManifestEntry> sources;
  for (const auto& img : images) {
    ++local.images;
    const auto mask = binarize_coco(img.segments, img.height, img.width);
    local.degenerate_segments += mask.skipped;
    if (mask.valid_segments == 0) {
      ++local.without_masks;
      continue;
    }
    const auto stem = std::filesystem::path(img.file_name).stem().string();
    const auto gt_path = out_dir / "gt" / (stem + ".png");
    const auto contour_path = out_dir / "contour" / (stem + ".png");
    write_mask_png(gt_path, mask.gt);
    write_mask_png(contour_path, derive_contour(mask.gt));
    sources.push_back({std::filesystem::absolute(images_dir / img.file_name).string(),
                       std::filesystem::absolute(gt_path).string(),
                       std::filesystem::absolute(contour_path).string(), Augmentation::none});
    ++local.kept;
  }
  if (local.degenerate_segments)
    spdlog::warn("skipped {} degenerate segmentation records", local.degenerate_segments);
  if (local.without_masks)
    spdlog::info("excluded {} images without a valid mask", local.without_masks);

  DatasetManifest manifest;
  manifest.entries = expand_with_flips(sources);
  manifest.phase = Phase::pretrain;
  manifest.source = "coco:" + annotations.filename().string();
  write_manifest(out_dir / "manifest.jsonl", manifest);
  if (stats) *stats = local;
  return manifest;
}

}  // namespace soda::data
