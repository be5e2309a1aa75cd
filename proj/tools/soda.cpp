#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "soda/data/coco.hpp"
#include "soda/data/manifest.hpp"
#include "soda/errors.hpp"
#include "soda/harness/grid.hpp"
#include "soda/harness/predict.hpp"
#include "soda/harness/train_plan.hpp"
#include "soda/harness/trainer.hpp"
#include "soda/metrics/evaluator.hpp"
#include "soda/model/network.hpp"

namespace fs = std::filesystem;
using namespace soda;

namespace {

struct BuildCocoArgs {
  std::string ann, images, out;
};
struct BuildDutsArgs {
  std::string root, out, phase = "finetune";
};
struct TrainArgs {
  std::string phase, variant, config, manifest, out = "runs/latest";
  std::vector<std::string> ablate;
  std::string resume;
};
struct EvalArgs {
  std::string pred, gt, manifest, out, name;
};
struct PredictArgs {
  std::string checkpoint, images, out;
};
struct GridArgs {
  std::vector<std::string> rows;
  std::string labels, out;
  int tile = 64;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

int build_coco(const BuildCocoArgs& a) {
  data::CocoBuildStats stats;
  const auto m = data::build_coco(a.ann, a.images, a.out, &stats);
  fmt::print("images {}  kept {}  without masks {}  degenerate segments {}  manifest entries {}\n",
             stats.images, stats.kept, stats.without_masks, stats.degenerate_segments,
             m.entries.size());
  return 0;
}

int build_duts(const BuildDutsArgs& a) {
  data::DutsBuildStats stats;
  const auto m = data::build_duts(a.root, a.out, data::parse_phase(a.phase), &stats);
  fmt::print("sources {}  skipped {}  manifest entries {}\n", stats.sources, stats.skipped,
             m.entries.size());
  return 0;
}

int train(const TrainArgs& a) {
  auto plan = harness::plan_for(data::parse_phase(a.phase));
  if (!a.config.empty()) plan = harness::read_plan(a.config, plan);
  plan.phase = data::parse_phase(a.phase);
  if (!a.variant.empty()) plan.variant = model::parse_variant(a.variant);
  for (const auto& flag : a.ablate) {
    for (const auto& f : split_commas(flag)) harness::apply_ablation(plan, f);
  }
  if (const auto seed = harness::seed_from_env()) plan.seed = *seed;
  plan.validate();
  spdlog::info("plan:\n{}", harness::format_plan(plan));

  harness::TrainOptions options;
  options.run_dir = a.out;
  if (!a.resume.empty()) options.resume = fs::path(a.resume);
  try {
    const auto record = harness::train(plan, data::read_manifest(a.manifest), options);
    fmt::print("{} steps, {} epochs, {:.1f}s, run record {}\n", record.steps,
               record.epochs_completed, record.wall_seconds, (record.run_dir / "run.json").string());
  } catch (const harness::TrainingHalted& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}

int eval(const EvalArgs& a) {
  const std::string name = a.name.empty() ? fs::path(a.pred).filename().string() : a.name;
  metrics::MetricReport report;
  if (!a.manifest.empty()) {
    report = metrics::evaluate_dataset(data::read_manifest(a.manifest), a.pred, name);
  } else {
    report = metrics::evaluate_directories(a.pred, a.gt, name);
  }
  if (!a.out.empty()) metrics::write_report(a.out, {report});
  std::cout << metrics::markdown_table({report});
  return 0;
}

int predict(const PredictArgs& a) {
  const auto stats = harness::predict(a.checkpoint, a.images, a.out);
  fmt::print("written {}  skipped {}\n", stats.written, stats.skipped);
  return 0;
}

int grid(const GridArgs& a) {
  std::vector<harness::GridRow> rows;
  for (const auto& r : a.rows) {
    harness::GridRow row;
    for (const auto& cell : split_commas(r)) {
      if (cell.empty() || cell == "-") {
        row.cells.emplace_back(std::nullopt);
      } else {
        row.cells.emplace_back(fs::path(cell));
      }
    }
    rows.push_back(std::move(row));
  }
  harness::GridOptions options;
  options.tile = a.tile;
  if (!a.labels.empty()) options.labels = split_commas(a.labels);
  const auto layout = harness::report_grid(rows, a.out, options);
  fmt::print("{}x{} canvas, {} placeholder tiles\n", layout.width, layout.height,
             layout.placeholders);
  return 0;
}

int params(const std::string& variant) {
  const auto cfg = model::preset(model::parse_variant(variant));
  model::SodaNet net(cfg);
  fmt::print("{} {}\n", model::to_string(cfg.variant), model::parameter_count(*net));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Salient object detection: data preparation, training, evaluation"};
  app.require_subcommand(1);
  int result = 0;

  auto* data_cmd = app.add_subcommand("data", "Build dataset manifests");
  data_cmd->require_subcommand(1);
  BuildCocoArgs coco;
  auto* coco_cmd = data_cmd->add_subcommand("build-coco", "Binarize COCO instance annotations");
  coco_cmd->add_option("--ann", coco.ann, "instances_*.json")->required();
  coco_cmd->add_option("--images", coco.images, "COCO image directory")->required();
  coco_cmd->add_option("--out", coco.out, "Output directory")->required();
  coco_cmd->callback([&] { result = build_coco(coco); });

  BuildDutsArgs duts;
  auto* duts_cmd = data_cmd->add_subcommand("build-duts", "Index a DUTS-style image/mask tree");
  duts_cmd->add_option("--root", duts.root, "Dataset root")->required();
  duts_cmd->add_option("--out", duts.out, "Output directory")->required();
  duts_cmd->add_option("--phase", duts.phase, "finetune (flip-expanded) or eval")
      ->check(CLI::IsMember({"finetune", "eval"}));
  duts_cmd->callback([&] { result = build_duts(duts); });

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--phase", tr.phase)->required()->check(
      CLI::IsMember({"pretrain", "finetune"}));
  train_cmd->add_option("--variant", tr.variant)->check(CLI::IsMember({"full", "m", "s"}));
  train_cmd->add_option("--config", tr.config, "Flat key: value plan file");
  train_cmd->add_option("--manifest", tr.manifest, "Manifest built by `soda data`")->required();
  train_cmd->add_option("--ablate", tr.ablate, "no_aglrfe, no_alpm, no_cfm, no_mrffam, fg_only");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");
  train_cmd->add_option("--out", tr.out, "Run directory");
  train_cmd->callback([&] { result = train(tr); });

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("--pred", ev.pred, "Prediction PNG directory")->required();
  auto* gt_opt = eval_cmd->add_option("--gt", ev.gt, "Ground-truth directory");
  auto* man_opt = eval_cmd->add_option("--manifest", ev.manifest, "Evaluation manifest");
  gt_opt->excludes(man_opt);
  eval_cmd->add_option("--out", ev.out, "report.json, report.md or report.csv");
  eval_cmd->add_option("--name", ev.name, "Dataset name in the report");
  eval_cmd->callback([&] {
    if (ev.gt.empty() && ev.manifest.empty()) throw CLI::ValidationError("--gt or --manifest");
    result = eval(ev);
  });

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Export saliency maps");
  predict_cmd->add_option("--checkpoint", pr.checkpoint)->required();
  predict_cmd->add_option("--images", pr.images)->required();
  predict_cmd->add_option("--out", pr.out)->required();
  predict_cmd->callback([&] { result = predict(pr); });

  GridArgs gr;
  auto* grid_cmd = app.add_subcommand("grid", "Compose a comparison grid");
  grid_cmd->add_option("--row", gr.rows, "Comma-separated cell paths, '-' for a missing cell")
      ->required();
  grid_cmd->add_option("--labels", gr.labels, "Comma-separated column labels");
  grid_cmd->add_option("--tile", gr.tile, "Tile side in pixels");
  grid_cmd->add_option("--out", gr.out)->required();
  grid_cmd->callback([&] { result = grid(gr); });

  std::string variant;
  auto* params_cmd = app.add_subcommand("params", "Print the parameter count of a variant");
  params_cmd->add_option("--variant", variant)->required()->check(
      CLI::IsMember({"full", "m", "s"}));
  params_cmd->callback([&] { result = params(variant); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return result;
}
