#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "soda/data/manifest.hpp"
#include "soda/metrics/measures.hpp"

namespace soda::metrics {

struct MetricReport {
  std::string dataset;
  std::size_t n_images = 0;
  double f_max = 0.0;
  double mae = 0.0;
  double s_m = 0.0;
  double e_m = 0.0;
  double f_w = 0.0;
  std::size_t empty_gt = 0;
  std::vector<std::pair<double, double>> f_curve;  // (precision, recall) x 256

  nlohmann::json to_json() const;
};

/// Column order of the result tables: F_max, MAE, S_m, E_m, F_w.
std::vector<std::string> report_columns();

std::string markdown_table(const std::vector<MetricReport>& reports);
std::string csv_table(const std::vector<MetricReport>& reports);
/// Chooses json/md/csv from the extension of `path`.
void write_report(const std::filesystem::path& path, const std::vector<MetricReport>& reports);

/// Streams image pairs into a dataset report. MAE, S, E and F_w are means of
/// per-image values; F_max averages P/R curves first.
class DatasetEvaluator {
public:
  explicit DatasetEvaluator(std::string dataset) : dataset_(std::move(dataset)) {}
  /// Resizes `pred` to the ground-truth size if needed.
  void add(const Map2f& pred, const Map2f& gt);
  MetricReport report() const;

private:
  std::string dataset_;
  std::size_t n_ = 0;
  double mae_ = 0.0, s_ = 0.0, e_ = 0.0, fw_ = 0.0;
  std::array<double, kThresholds> precision_{};
  std::array<double, kThresholds> recall_{};
  std::size_t with_fg_ = 0;
};

/// Pairs predictions with ground truths by file stem.
MetricReport evaluate_directories(const std::filesystem::path& pred_dir,
                                  const std::filesystem::path& gt_dir, std::string dataset);
/// Ground truth comes from the manifest (entries with aug == none).
MetricReport evaluate_dataset(const data::DatasetManifest& manifest,
                              const std::filesystem::path& pred_dir, std::string dataset);

}  // namespace soda::metrics
