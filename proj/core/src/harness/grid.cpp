#include "soda/harness/grid.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include "soda/errors.hpp"

namespace soda::harness {
namespace fs = std::filesystem;

GridLayout report_grid(const std::vector<GridRow>& rows, const fs::path& out,
                       const GridOptions& options) {
  if (options.tile <= 0 || options.label_height < 0) {
    throw ConfigError("grid tile size must be positive");
  }
  std::size_t columns = 0;
  for (const auto& r : rows) columns = std::max(columns, r.cells.size());
  if (rows.empty() || columns == 0) throw ConfigError("grid needs at least one cell");

  GridLayout layout;
  layout.width = static_cast<int>(columns) * options.tile;
  layout.height = options.label_height + static_cast<int>(rows.size()) * options.tile;
  cv::Mat canvas(layout.height, layout.width, CV_8UC3, cv::Scalar(255, 255, 255));

  if (options.label_height > 0) {
    for (std::size_t c = 0; c < columns && c < options.labels.size(); ++c) {
      const double scale = options.label_height / 32.0;
      cv::putText(canvas, options.labels[c],
                  {static_cast<int>(c) * options.tile + 2, options.label_height - 4},
                  cv::FONT_HERSHEY_SIMPLEX, scale, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < columns; ++c) {
      const cv::Rect roi(static_cast<int>(c) * options.tile,
                         options.label_height + static_cast<int>(r) * options.tile, options.tile,
                         options.tile);
      cv::Mat tile;
      const auto& cell = c < rows[r].cells.size() ? rows[r].cells[c] : std::nullopt;
      if (cell) {
        tile = cv::imread(cell->string(), cv::IMREAD_COLOR);
        if (tile.empty()) spdlog::warn("grid: cannot read {}", cell->string());
      }
      if (tile.empty()) {
        ++layout.placeholders;
        canvas(roi).setTo(cv::Scalar(128, 128, 128));
        continue;
      }
      cv::resize(tile, canvas(roi), roi.size(), 0, 0, cv::INTER_AREA);
    }
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (!cv::imwrite(out.string(), canvas)) throw IoError("cannot write " + out.string());
  return layout;
}

}  // namespace soda::harness
