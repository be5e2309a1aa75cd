#include "soda/metrics/evaluator.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "soda/data/image_io.hpp"
#include "soda/errors.hpp"

namespace soda::metrics {
namespace fs = std::filesystem;

nlohmann::json MetricReport::to_json() const {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [p, r] : f_curve) curve.push_back({{"precision", p}, {"recall", r}});
  return {{"dataset", dataset}, {"n_images", n_images}, {"F_max", f_max},
          {"MAE", mae},         {"S_m", s_m},           {"E_m", e_m},
          {"F_w", f_w},         {"empty_gt", empty_gt}, {"pr_curve", curve}};
}

std::vector<std::string> report_columns() { return {"F_max", "MAE", "S_m", "E_m", "F_w"}; }

namespace {

std::vector<double> row_values(const MetricReport& r) {
  return {r.f_max, r.mae, r.s_m, r.e_m, r.f_w};
}

}  // namespace

std::string markdown_table(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "| Dataset | Images";
  for (const auto& c : report_columns()) out << " | " << c;
  out << " |\n|---|---:";
  for (std::size_t i = 0; i < report_columns().size(); ++i) out << "|---:";
  out << "|\n";
  for (const auto& r : reports) {
    out << "| " << r.dataset << " | " << r.n_images;
    for (double v : row_values(r)) out << " | " << fmt::format("{:.3f}", v);
    out << " |\n";
  }
  return out.str();
}

std::string csv_table(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "dataset,n_images";
  for (const auto& c : report_columns()) out << ',' << c;
  out << '\n';
  for (const auto& r : reports) {
    out << r.dataset << ',' << r.n_images;
    for (double v : row_values(r)) out << ',' << fmt::format("{:.6f}", v);
    out << '\n';
  }
  return out.str();
}

void write_report(const fs::path& path, const std::vector<MetricReport>& reports) {
  const auto ext = path.extension().string();
  std::string text;
  if (ext == ".json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    text = j.dump(2) + "\n";
  } else if (ext == ".md") {
    text = markdown_table(reports);
  } else if (ext == ".csv") {
    text = csv_table(reports);
  } else {
    throw ConfigError("report extension must be .json, .md or .csv: " + path.string());
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void DatasetEvaluator::add(const Map2f& pred, const Map2f& gt) {
  const Map2f p = pred.same_shape(gt) ? pred : data::resize_map(pred, gt.rows(), gt.cols());
  ++n_;
  mae_ += mae(p, gt);
  s_ += s_measure(p, gt);
  e_ += e_measure(p, gt);
  fw_ += weighted_f(p, gt);
  const auto curve = pr_curve(p, gt);
  if (!curve.has_foreground) return;
  ++with_fg_;
  for (int t = 0; t < kThresholds; ++t) {
    precision_[t] += curve.precision[t];
    recall_[t] += curve.recall[t];
  }
}

MetricReport DatasetEvaluator::report() const {
  MetricReport r;
  r.dataset = dataset_;
  r.n_images = n_;
  r.empty_gt = n_ - with_fg_;
  if (n_ == 0) return r;
  const double n = static_cast<double>(n_);
  r.mae = mae_ / n;
  r.s_m = s_ / n;
  r.e_m = e_ / n;
  r.f_w = fw_ / n;
  r.f_curve.resize(kThresholds);
  for (int t = 0; t < kThresholds; ++t) {
    const double p = with_fg_ ? precision_[t] / with_fg_ : 0.0;
    const double rc = with_fg_ ? recall_[t] / with_fg_ : 0.0;
    r.f_curve[t] = {p, rc};
    r.f_max = std::max(r.f_max, f_beta(p, rc));
  }
  return r;
}

namespace {

std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && data::is_image_file(e.path())) {
      out[e.path().stem().string()] = e.path();
    }
  }
  return out;
}

Map2f binarized(const Map2f& gt) {
  Map2f out(gt.rows(), gt.cols());
  for (std::size_t i = 0; i < gt.size(); ++i) out.values()[i] = gt.values()[i] > 0.5F ? 1.F : 0.F;
  return out;
}

}  // namespace

MetricReport evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir,
                                  std::string dataset) {
  const auto preds = images_by_stem(pred_dir);
  const auto gts = images_by_stem(gt_dir);
  DatasetEvaluator eval(std::move(dataset));
  std::size_t missing = 0;
  for (const auto& [stem, gt_path] : gts) {
    const auto it = preds.find(stem);
    if (it == preds.end()) {
      ++missing;
      continue;
    }
    eval.add(data::read_gray(it->second), binarized(data::read_gray(gt_path)));
  }
  if (missing > 0) spdlog::warn("{} ground-truth images have no prediction", missing);
  if (eval.report().n_images == 0) {
    throw IoError("no prediction/ground-truth pairs between " + pred_dir.string() + " and " +
                  gt_dir.string());
  }
  return eval.report();
}

MetricReport evaluate_dataset(const data::DatasetManifest& manifest, const fs::path& pred_dir,
                              std::string dataset) {
  const auto preds = images_by_stem(pred_dir);
  DatasetEvaluator eval(std::move(dataset));
  std::size_t missing = 0;
  for (const auto& e : manifest.entries) {
    if (e.aug != data::Augmentation::none) continue;
    const auto it = preds.find(fs::path(e.image).stem().string());
    if (it == preds.end()) {
      ++missing;
      continue;
    }
    eval.add(data::read_gray(it->second), binarized(data::read_gray(e.gt)));
  }
  if (missing > 0) spdlog::warn("{} manifest entries have no prediction", missing);
  return eval.report();
}

}  // namespace soda::metrics
