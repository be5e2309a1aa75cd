#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace soda::model {

enum class Variant { full, medium, small, custom };

std::string_view to_string(Variant v);
/// Accepts "full", "medium"/"m", "small"/"s", "custom".
Variant parse_variant(std::string_view name);

/// Which blocks are replaced by a plain conv stand-in of matching output shape.
struct Ablation {
  bool no_aglrfe = false;
  bool no_alpm = false;
  bool no_cfm = false;
  bool no_mrffam = false;

  bool any() const { return no_aglrfe || no_alpm || no_cfm || no_mrffam; }
  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct ModelConfig {
  Variant variant = Variant::custom;
  int stem_channels = 16;
  /// Output width of each encoder stage; decoder stage j restores the width
  /// of the skip it consumes.
  std::vector<int> stage_channels{32, 64};
  int encoder_stages = 2;
  int decoder_stages = 2;
  std::vector<int> aglrfe_dilations{6, 10, 14, 18, 22};
  std::vector<int> decoder_mrffam_dilations{2, 4, 6, 8};
  /// Average-pool stride in front of the AGLRFE attention, one per encoder stage.
  std::vector<int> attn_pool_strides{4, 2};
  /// Query/key width. 0 means "use the channel width of the attention site".
  int attn_dk = 0;
  int groupnorm_groups = 4;
  std::array<int, 2> input_size{384, 384};
  Ablation ablation{};

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  /// Spatial side lengths must be a multiple of this.
  int spatial_divisor() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

ModelConfig preset(Variant v);
/// Tiny configuration for finite-difference checks on 8x8 inputs.
ModelConfig toy_config();

/// Human-readable list of fields whose values differ, e.g.
/// "stage_channels: [32,64] != [64,128]". Empty when equal.
std::vector<std::string> diff(const ModelConfig& a, const ModelConfig& b);

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

}  // namespace soda::model
