#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soda/data/manifest.hpp"
#include "soda/data/sample.hpp"
#include "soda/errors.hpp"
#include "soda/harness/train_plan.hpp"
#include "soda/model/network.hpp"
#include "soda/supervision/losses.hpp"

namespace soda::harness {

struct RunRecord {
  std::filesystem::path run_dir;
  TrainPlan plan;
  model::ModelConfig model;
  uint64_t seed = 0;
  std::filesystem::path step_log;  // JSON lines, one loss breakdown per step
  std::vector<std::filesystem::path> checkpoints;
  std::vector<double> step_losses;
  int64_t steps = 0;
  int epochs_completed = 0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

/// Raised when a step produces a non-finite loss. Carries the newest
/// checkpoint written before the failure (empty if none).
class TrainingHalted : public NumericError {
public:
  TrainingHalted(const std::string& what, std::filesystem::path last_good)
      : NumericError(what), last_good_(std::move(last_good)) {}
  const std::filesystem::path& last_good() const { return last_good_; }

private:
  std::filesystem::path last_good_;
};

struct StepInfo {
  int epoch = 0;
  int64_t step = 0;  // 0-based optimizer step
  double lr = 0.0;
  const supervision::LossBreakdown* loss = nullptr;
};

struct TrainOptions {
  /// Checkpoints, step log and run.json go here. Empty keeps everything in
  /// memory (no files written).
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> resume;
  /// Called after every optimizer step; returning false stops training.
  std::function<bool(const StepInfo&, model::SodaNet&)> on_step;
};

class Trainer {
public:
  explicit Trainer(TrainPlan plan);

  RunRecord run(const data::SampleSource& source, const TrainOptions& options);

  model::SodaNet& model() { return net_; }
  const TrainPlan& plan() const { return plan_; }

private:
  void save(const std::filesystem::path& path, int epoch, int64_t step) const;
  int restore(const std::filesystem::path& path, int64_t& step);

  TrainPlan plan_;
  model::SodaNet net_{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer_;
};

/// Loss of the first batch in epoch 1 order, without an optimizer step.
supervision::LossBreakdown initial_loss(const TrainPlan& plan, const data::SampleSource& source);

RunRecord train(const TrainPlan& plan, const data::DatasetManifest& manifest,
                const TrainOptions& options);

}  // namespace soda::harness
