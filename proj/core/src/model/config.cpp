#include "soda/model/config.hpp"

#include <algorithm>
#include <sstream>

#include "soda/errors.hpp"

namespace soda::model {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::medium: return "medium";
    case Variant::small: return "small";
    case Variant::custom: return "custom";
  }
  return "custom";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::full;
  if (name == "medium" || name == "m") return Variant::medium;
  if (name == "small" || name == "s") return Variant::small;
  if (name == "custom") return Variant::custom;
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("invalid ModelConfig: " + message);
}

std::string join(const std::vector<int>& values) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  out << ']';
  return out.str();
}

}  // namespace

int ModelConfig::spatial_divisor() const { return 1 << (encoder_stages + 1); }

void ModelConfig::validate() const {
  require(encoder_stages >= 1, "encoder_stages must be >= 1");
  require(decoder_stages == encoder_stages, "decoder_stages must equal encoder_stages");
  require(static_cast<int>(stage_channels.size()) == encoder_stages,
          "stage_channels needs one entry per encoder stage");
  require(static_cast<int>(attn_pool_strides.size()) == encoder_stages,
          "attn_pool_strides needs one entry per encoder stage");
  require(groupnorm_groups > 0, "groupnorm_groups must be positive");
  require(stem_channels > 0 && stem_channels % groupnorm_groups == 0,
          "stem_channels must be positive and divisible by groupnorm_groups");
  require(!aglrfe_dilations.empty(), "aglrfe_dilations is empty");
  require(std::all_of(aglrfe_dilations.begin(), aglrfe_dilations.end(),
                      [](int d) { return d >= 1; }),
          "aglrfe_dilations must be >= 1");
  require(std::adjacent_find(aglrfe_dilations.begin(), aglrfe_dilations.end(),
                             [](int a, int b) { return b <= a; }) == aglrfe_dilations.end(),
          "aglrfe_dilations must be strictly increasing");
  require(!decoder_mrffam_dilations.empty(), "decoder_mrffam_dilations is empty");
  require(std::all_of(decoder_mrffam_dilations.begin(), decoder_mrffam_dilations.end(),
                      [](int d) { return d >= 1; }),
          "decoder_mrffam_dilations must be >= 1");
  const int chunks = static_cast<int>(decoder_mrffam_dilations.size());
  for (int c : stage_channels) {
    require(c > 0, "stage_channels must be positive");
    require(c % groupnorm_groups == 0,
            "stage width " + std::to_string(c) + " not divisible by groupnorm_groups");
    require(c % chunks == 0, "stage width " + std::to_string(c) + " not divisible into " +
                                 std::to_string(chunks) + " MRFFAM chunks");
    require((c / chunks) % groupnorm_groups == 0,
            "MRFFAM chunk width " + std::to_string(c / chunks) +
                " not divisible by groupnorm_groups");
  }
  for (int s : attn_pool_strides) require(s == 2 || s == 4, "attn_pool_stride must be 2 or 4");
  require(attn_dk >= 0, "attn_dk must be >= 0");
  const int div = spatial_divisor();
  require(input_size[0] > 0 && input_size[1] > 0 && input_size[0] % div == 0 &&
              input_size[1] % div == 0,
          "input_size must be positive multiples of " + std::to_string(div));
}

ModelConfig preset(Variant v) {
  ModelConfig cfg;
  cfg.variant = v;
  switch (v) {
    case Variant::full:
      cfg.stem_channels = 64;
      cfg.stage_channels = {128, 240};
      break;
    case Variant::medium:
      cfg.stem_channels = 32;
      cfg.stage_channels = {48, 128};
      break;
    case Variant::small:
      cfg.stem_channels = 16;
      cfg.stage_channels = {24, 64};
      cfg.decoder_mrffam_dilations = {2, 4};
      break;
    case Variant::custom:
      break;
  }
  return cfg;
}

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.variant = Variant::custom;
  cfg.stem_channels = 8;
  cfg.stage_channels = {8, 8};
  cfg.aglrfe_dilations = {1, 2};
  cfg.decoder_mrffam_dilations = {1, 2};
  cfg.groupnorm_groups = 1;
  cfg.input_size = {8, 8};
  return cfg;
}

std::vector<std::string> diff(const ModelConfig& a, const ModelConfig& b) {
  std::vector<std::string> out;
  auto add = [&](const char* field, const std::string& x, const std::string& y) {
    if (x != y) out.push_back(std::string(field) + ": " + x + " != " + y);
  };
  auto str = [](int v) { return std::to_string(v); };
  add("variant", std::string(to_string(a.variant)), std::string(to_string(b.variant)));
  add("stem_channels", str(a.stem_channels), str(b.stem_channels));
  add("stage_channels", join(a.stage_channels), join(b.stage_channels));
  add("encoder_stages", str(a.encoder_stages), str(b.encoder_stages));
  add("decoder_stages", str(a.decoder_stages), str(b.decoder_stages));
  add("aglrfe_dilations", join(a.aglrfe_dilations), join(b.aglrfe_dilations));
  add("decoder_mrffam_dilations", join(a.decoder_mrffam_dilations),
      join(b.decoder_mrffam_dilations));
  add("attn_pool_strides", join(a.attn_pool_strides), join(b.attn_pool_strides));
  add("attn_dk", str(a.attn_dk), str(b.attn_dk));
  add("groupnorm_groups", str(a.groupnorm_groups), str(b.groupnorm_groups));
  add("input_size", join({a.input_size[0], a.input_size[1]}),
      join({b.input_size[0], b.input_size[1]}));
  auto flags = [](const Ablation& x) {
    return join({x.no_aglrfe, x.no_alpm, x.no_cfm, x.no_mrffam});
  };
  add("ablation[no_aglrfe,no_alpm,no_cfm,no_mrffam]", flags(a.ablation), flags(b.ablation));
  return out;
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = nlohmann::json{
      {"variant", to_string(cfg.variant)},
      {"stem_channels", cfg.stem_channels},
      {"stage_channels", cfg.stage_channels},
      {"encoder_stages", cfg.encoder_stages},
      {"decoder_stages", cfg.decoder_stages},
      {"aglrfe_dilations", cfg.aglrfe_dilations},
      {"decoder_mrffam_dilations", cfg.decoder_mrffam_dilations},
      {"attn_pool_strides", cfg.attn_pool_strides},
      {"attn_dk", cfg.attn_dk},
      {"groupnorm_groups", cfg.groupnorm_groups},
      {"input_size", cfg.input_size},
      {"ablation",
       {{"no_aglrfe", cfg.ablation.no_aglrfe},
        {"no_alpm", cfg.ablation.no_alpm},
        {"no_cfm", cfg.ablation.no_cfm},
        {"no_mrffam", cfg.ablation.no_mrffam}}},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  j.at("stem_channels").get_to(cfg.stem_channels);
  j.at("stage_channels").get_to(cfg.stage_channels);
  j.at("encoder_stages").get_to(cfg.encoder_stages);
  j.at("decoder_stages").get_to(cfg.decoder_stages);
  j.at("aglrfe_dilations").get_to(cfg.aglrfe_dilations);
  j.at("decoder_mrffam_dilations").get_to(cfg.decoder_mrffam_dilations);
  j.at("attn_pool_strides").get_to(cfg.attn_pool_strides);
  j.at("attn_dk").get_to(cfg.attn_dk);
  j.at("groupnorm_groups").get_to(cfg.groupnorm_groups);
  j.at("input_size").get_to(cfg.input_size);
  const auto& ab = j.at("ablation");
  ab.at("no_aglrfe").get_to(cfg.ablation.no_aglrfe);
  ab.at("no_alpm").get_to(cfg.ablation.no_alpm);
  ab.at("no_cfm").get_to(cfg.ablation.no_cfm);
  ab.at("no_mrffam").get_to(cfg.ablation.no_mrffam);
}

}  // namespace soda::model
