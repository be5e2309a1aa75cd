#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "soda/data/manifest.hpp"
#include "soda/model/config.hpp"

namespace soda::harness {

/// The learning rate is multiplied by `multiplier` from epoch `after + 1` on.
struct LrStep {
  int after = 0;
  double multiplier = 1.0;

  friend bool operator==(const LrStep&, const LrStep&) = default;
};

struct TrainPlan {
  data::Phase phase = data::Phase::finetune;
  int epochs = 11;
  double lr0 = 1e-3;
  std::vector<LrStep> lr_schedule;
  double beta = 0.5;
  uint64_t seed = 0;
  int batch_size = 8;
  model::Variant variant = model::Variant::full;
  model::Ablation ablation{};
  /// Drop the background term entirely (beta = 0).
  bool fg_only = false;
  /// Square training resolution; 0 keeps the variant's input size.
  int image_size = 0;
  /// Stop after this many optimizer steps; 0 runs every epoch.
  int64_t max_steps = 0;
  double grad_clip = 0.0;  // 0 disables clipping
  std::string optimizer = "adam";

  /// Learning rate of 1-indexed `epoch`.
  double lr_at(int epoch) const;
  double effective_beta() const { return fg_only ? 0.0 : beta; }
  model::ModelConfig model_config() const;

  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const TrainPlan&, const TrainPlan&) = default;
};

/// 21 epochs, lr 1e-3 halved after epoch 15, beta 1.
TrainPlan pretrain_plan();
/// 11 epochs, lr 1e-3 multiplied by 0.1 after epoch 5, beta 0.5.
TrainPlan finetune_plan();
TrainPlan plan_for(data::Phase phase);

/// Accepts no_aglrfe, no_alpm, no_cfm, no_mrffam and fg_only.
void apply_ablation(TrainPlan& plan, std::string_view flag);
std::vector<std::string> ablation_flags(const TrainPlan& plan);

/// Flat "key: value" text, one field per line, '#' starts a comment.
/// Keys: phase, epochs, lr0, lr_schedule ("15:0.5, 20:0.1"), beta, seed,
/// batch_size, variant, ablation (comma list), image_size, max_steps,
/// grad_clip, optimizer. Unknown keys are errors.
TrainPlan parse_plan(std::string_view text, TrainPlan base);
TrainPlan read_plan(const std::filesystem::path& path, TrainPlan base);
std::string format_plan(const TrainPlan& plan);

/// Value of SODA_SEED when set.
std::optional<uint64_t> seed_from_env();

/// "field: a != b" for every differing field.
std::vector<std::string> diff(const TrainPlan& a, const TrainPlan& b);

void to_json(nlohmann::json& j, const TrainPlan& plan);
void from_json(const nlohmann::json& j, TrainPlan& plan);

}  // namespace soda::harness
