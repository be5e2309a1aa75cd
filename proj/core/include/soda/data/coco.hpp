#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "soda/data/manifest.hpp"
#include "soda/grid.hpp"

namespace soda::data {

/// Flat [x0,y0,x1,y1,...] vertex list in pixel coordinates.
struct Polygon {
  std::vector<double> xy;
};

/// Column-major run lengths, starting with a run of zeros.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<uint32_t> counts;
};

/// One annotated object: either polygon parts or an RLE mask.
struct Segmentation {
  std::vector<Polygon> polygons;
  std::optional<Rle> rle;
};

struct CocoImage {
  int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::vector<Segmentation> segments;
};

/// Groups the instance annotations of a COCO json document by image.
std::vector<CocoImage> parse_coco(const nlohmann::json& doc);

/// Decodes the compact string form of COCO run lengths.
std::vector<uint32_t> decode_rle_counts(std::string_view encoded);
Mask2u8 decode_rle(const Rle& rle);

/// Twice the signed area (shoelace).
double polygon_area2(const Polygon& poly);
/// Sets every pixel whose centre lies inside `poly` (even-odd rule) to 1.
void rasterize_polygon(const Polygon& poly, Mask2u8& mask);

struct BinarizedMask {
  Mask2u8 gt;
  std::size_t valid_segments = 0;
  std::size_t skipped = 0;  // degenerate polygons / malformed RLE
};

/// Union of every instance mask of one image; pixels are 0 or 1.
BinarizedMask binarize_coco(const std::vector<Segmentation>& segments, int height, int width);

struct CocoBuildStats {
  std::size_t images = 0;
  std::size_t kept = 0;
  std::size_t without_masks = 0;
  std::size_t degenerate_segments = 0;
};

/// Writes binarized ground truth and contour PNGs for every image with at
/// least one valid mask and a flip-expanded pre-training manifest.
DatasetManifest build_coco(const std::filesystem::path& annotations,
                           const std::filesystem::path& images_dir,
                           const std::filesystem::path& out_dir, CocoBuildStats* stats = nullptr);

}  // namespace soda::data
