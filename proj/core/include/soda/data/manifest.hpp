#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace soda::data {

enum class Augmentation { none, hflip, vflip };
enum class Phase { pretrain, finetune, eval };

std::string_view to_string(Augmentation a);
Augmentation parse_augmentation(std::string_view s);
std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

struct ManifestEntry {
  std::string image;
  std::string gt;
  std::string contour;
  Augmentation aug = Augmentation::none;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Phase phase = Phase::finetune;
  std::string source;
};

/// Every source entry three times: as is, horizontally and vertically flipped.
std::vector<ManifestEntry> expand_with_flips(const std::vector<ManifestEntry>& sources);

/// JSON-lines, one {"image","gt","contour","aug"} object per line. Paths are
/// written relative to the manifest directory when they live under it.
/// Phase and source go to a "<path>.meta.json" sidecar.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
/// Relative paths are resolved against the manifest directory.
DatasetManifest read_manifest(const std::filesystem::path& path);

struct ValidationReport {
  std::size_t checked = 0;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Checks that every referenced file exists and decodes.
ValidationReport validate_manifest(const DatasetManifest& manifest);

struct DutsBuildStats {
  std::size_t sources = 0;
  std::size_t skipped = 0;
};

/// Scans a DUTS-style root (an "*-Image" / "*-Mask" directory pair, or
/// "images" / "masks"), writes contour PNGs under `out_dir/contour` and the
/// manifest to `out_dir/manifest.jsonl`. Training splits are expanded with
/// flips; `phase == eval` keeps one entry per image.
DatasetManifest build_duts(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                           Phase phase, DutsBuildStats* stats = nullptr);

}  // namespace soda::data
