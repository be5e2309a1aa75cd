#include "soda/model/network.hpp"

#include <sstream>

#include "soda/errors.hpp"

namespace soda::model {

namespace {

constexpr Site kAllSites[] = {Site::aglrfe, Site::alpm, Site::cfm, Site::mrffam, Site::cfmd};

bool site_ablated(Site site, const Ablation& ab) {
  switch (site) {
    case Site::aglrfe: return ab.no_aglrfe;
    case Site::alpm: return ab.no_alpm;
    case Site::cfm: return ab.no_cfm;
    case Site::mrffam: return ab.no_mrffam;
    case Site::cfmd: return false;
  }
  return false;
}

bool has_contour(Site site) { return site == Site::mrffam || site == Site::cfmd; }

std::string module_key(const HeadId& id) {
  std::string key(to_string(id.site));
  key += std::to_string(id.stage);
  return key;
}

torch::nn::Conv2d head_conv(int channels) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 1, 1).bias(true));
}

}  // namespace

std::string_view to_string(Site site) {
  switch (site) {
    case Site::aglrfe: return "AGLRFE";
    case Site::alpm: return "ALPM";
    case Site::cfm: return "CFM";
    case Site::mrffam: return "MRFFAM";
    case Site::cfmd: return "CFMD";
  }
  return "?";
}

std::string HeadId::name() const {
  return module_key(*this) + (kind == HeadKind::saliency ? "/sal" : "/con");
}

HeadId HeadId::parse(std::string_view name) {
  const auto slash = name.find('/');
  if (slash == std::string_view::npos || slash < 2)
    throw std::invalid_argument("bad head id '" + std::string(name) + "'");
  const auto kind = name.substr(slash + 1);
  const auto site_part = name.substr(0, slash - 1);
  const int stage = name[slash - 1] - '0';
  for (Site s : kAllSites) {
    if (to_string(s) == site_part && (kind == "sal" || kind == "con") && stage >= 1 && stage <= 9)
      return {s, stage, kind == "sal" ? HeadKind::saliency : HeadKind::contour};
  }
  throw std::invalid_argument("bad head id '" + std::string(name) + "'");
}

std::vector<HeadId> expected_heads(const Ablation& ablation, int stages) {
  std::vector<HeadId> out;
  for (Site site : kAllSites) {
    if (site_ablated(site, ablation)) continue;
    for (int stage = 1; stage <= stages; ++stage) {
      out.push_back({site, stage, HeadKind::saliency});
      if (has_contour(site)) out.push_back({site, stage, HeadKind::contour});
    }
  }
  return out;
}

const torch::Tensor& ForwardOutputs::at(const HeadId& id) const {
  auto it = heads.find(id);
  if (it == heads.end()) throw std::out_of_range("missing head " + id.name());
  return it->second;
}

torch::Tensor final_logits(const ForwardOutputs& outputs, int64_t height, int64_t width) {
  // The last decoder stage carries the highest stage number among CFMD heads.
  const HeadId* last = nullptr;
  for (const auto& [id, _] : outputs.heads)
    if (id.site == Site::cfmd && id.kind == HeadKind::saliency) last = &id;
  if (!last) throw std::out_of_range("outputs carry no CFMD saliency head");
  return resize_bilinear(outputs.heads.at(*last), height, width);
}

torch::Tensor final_prediction(const ForwardOutputs& outputs, int64_t height, int64_t width) {
  return torch::sigmoid(final_logits(outputs, height, width));
}

EncoderStageImpl::EncoderStageImpl(int in, int out, const ModelConfig& cfg, int stage) {
  const std::string site = "encoder" + std::to_string(stage);
  const int stride = cfg.attn_pool_strides.at(static_cast<std::size_t>(stage - 1));
  if (cfg.ablation.no_aglrfe)
    global_standin = register_module("global_standin", DownProjection(in, out));
  else
    aglrfe = register_module("aglrfe", Aglrfe(in, out, cfg.aglrfe_dilations, stride, cfg.attn_dk,
                                              cfg.groupnorm_groups, site + ".aglrfe"));
  if (cfg.ablation.no_alpm)
    local_standin = register_module("local_standin", DownProjection(in, out));
  else
    alpm = register_module("alpm", Alpm(in, out, cfg.attn_dk, site + ".alpm"));
  if (cfg.ablation.no_cfm)
    merge_standin = register_module("merge_standin", conv_block_b(2 * out, out));
  else
    cfm = register_module("cfm", Cfm(out, out, out, cfg.groupnorm_groups));
}

EncoderOutput EncoderStageImpl::forward(const torch::Tensor& x) {
  EncoderOutput out;
  out.global = aglrfe ? aglrfe->forward(x) : global_standin->forward(x);
  out.local = alpm ? alpm->forward(x) : local_standin->forward(x);
  out.merged = cfm ? cfm->forward(out.global, out.local)
                   : merge_standin->forward(torch::cat({out.global, out.local}, 1));
  return out;
}

namespace {

void add_head(torch::nn::ModuleDict& dict, const HeadId& id, int channels) {
  dict->update(std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>>{
      {module_key(id), head_conv(channels).ptr()}});
}

}  // namespace

SodaNetImpl::SodaNetImpl(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int stages = cfg_.encoder_stages;
  stem = register_module("stem", conv_block_b(3, cfg_.stem_channels));
  encoders = register_module("encoders", torch::nn::ModuleList());
  decoders = register_module("decoders", torch::nn::ModuleList());
  saliency_heads = register_module("saliency_heads", torch::nn::ModuleDict());
  contour_heads = register_module("contour_heads", torch::nn::ModuleDict());

  std::vector<int> widths{cfg_.stem_channels};
  for (int c : cfg_.stage_channels) widths.push_back(c);

  for (int s = 1; s <= stages; ++s) {
    const int in = widths[s - 1], out = widths[s];
    encoders->push_back(EncoderStage(in, out, cfg_, s));
    for (Site site : {Site::aglrfe, Site::alpm, Site::cfm}) {
      if (site_ablated(site, cfg_.ablation)) continue;
      add_head(saliency_heads, {site, s, HeadKind::saliency}, out);
    }
  }
  for (int j = 1; j <= stages; ++j) {
    const int in = widths[stages - j + 1], skip = widths[stages - j];
    decoders->push_back(DecoderStage(in, skip, skip, cfg_.decoder_mrffam_dilations,
                                     cfg_.groupnorm_groups, cfg_.ablation.no_mrffam));
    if (!cfg_.ablation.no_mrffam) {
      add_head(saliency_heads, {Site::mrffam, j, HeadKind::saliency}, in);
      add_head(contour_heads, {Site::mrffam, j, HeadKind::contour}, in);
    }
    add_head(saliency_heads, {Site::cfmd, j, HeadKind::saliency}, skip);
    add_head(contour_heads, {Site::cfmd, j, HeadKind::contour}, skip);
  }
}

ForwardOutputs SodaNetImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3) {
    std::ostringstream msg;
    msg << "model input must be (B,3,H,W), got " << image.sizes();
    throw ShapeError(msg.str());
  }
  const int div = cfg_.spatial_divisor();
  if (image.size(2) % div != 0 || image.size(3) % div != 0)
    throw ShapeError("model input sides must be multiples of " + std::to_string(div));
  if (!torch::isfinite(image).all().item<bool>())
    throw NumericError("model input contains NaN or Inf");

  ForwardOutputs out;
  auto emit = [&](Site site, int stage, const torch::Tensor& feature, bool contour) {
    const HeadId sal{site, stage, HeadKind::saliency};
    out.heads[sal] = saliency_heads[module_key(sal)]->as<torch::nn::Conv2d>()->forward(feature);
    if (contour) {
      const HeadId con{site, stage, HeadKind::contour};
      out.heads[con] = contour_heads[module_key(con)]->as<torch::nn::Conv2d>()->forward(feature);
    }
  };

  const int stages = cfg_.encoder_stages;
  std::vector<torch::Tensor> skips{stem->forward(image)};
  for (int s = 1; s <= stages; ++s) {
    auto enc = encoders[s - 1]->as<EncoderStage>()->forward(skips.back());
    if (!cfg_.ablation.no_aglrfe) emit(Site::aglrfe, s, enc.global, false);
    if (!cfg_.ablation.no_alpm) emit(Site::alpm, s, enc.local, false);
    if (!cfg_.ablation.no_cfm) emit(Site::cfm, s, enc.merged, false);
    skips.push_back(enc.merged);
  }
  auto x = skips.back();
  for (int j = 1; j <= stages; ++j) {
    auto dec = decoders[j - 1]->as<DecoderStage>()->forward(x, skips[stages - j]);
    if (!cfg_.ablation.no_mrffam) emit(Site::mrffam, j, dec.mrffam, true);
    emit(Site::cfmd, j, dec.output, true);
    x = dec.output;
  }
  return out;
}

void SodaNetImpl::attach_trace(const std::shared_ptr<ShapeTrace>& trace) {
  for (auto& m : modules(/*include_self=*/false))
    if (auto* attn = m->as<SelfAttention>()) attn->attach_trace(trace);
}

int64_t parameter_count(const torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters())
    if (p.requires_grad()) total += p.numel();
  return total;
}

}  // namespace soda::model
