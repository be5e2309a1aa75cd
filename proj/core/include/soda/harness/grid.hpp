#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace soda::harness {

/// One grid row: cells are image paths; nullopt (or an unreadable file)
/// renders as a gray placeholder.
struct GridRow {
  std::vector<std::optional<std::filesystem::path>> cells;
};

struct GridOptions {
  int tile = 64;
  int label_height = 16;
  /// Column captions for the label strip; missing entries stay blank.
  std::vector<std::string> labels;
};

struct GridLayout {
  int width = 0;
  int height = 0;
  int placeholders = 0;
};

/// Tiles rows x columns (columns = longest row) into one RGB PNG with a label
/// strip on top: width = columns * tile, height = label_height + rows * tile.
GridLayout report_grid(const std::vector<GridRow>& rows, const std::filesystem::path& out,
                       const GridOptions& options = {});

}  // namespace soda::harness
