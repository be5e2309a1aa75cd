#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "soda/model/blocks.hpp"
#include "soda/model/config.hpp"

namespace soda::model {

enum class Site { aglrfe, alpm, cfm, mrffam, cfmd };
enum class HeadKind { saliency, contour };

std::string_view to_string(Site site);

/// One supervised output: a site, its stage (1-based) and what it predicts.
struct HeadId {
  Site site;
  int stage;
  HeadKind kind;

  /// "CFMD2/sal", "MRFFAM1/con", ...
  std::string name() const;
  static HeadId parse(std::string_view name);

  friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

/// Supervised head set for a model built with `ablation`: ten saliency heads
/// and four contour heads, minus the heads of any ablated site.
std::vector<HeadId> expected_heads(const Ablation& ablation = {}, int stages = 2);

/// Pre-sigmoid logit maps of every supervised head, each (B,1,h,w) at the
/// resolution of the site that produced it.
struct ForwardOutputs {
  std::map<HeadId, torch::Tensor> heads;

  const torch::Tensor& at(const HeadId& id) const;
  bool contains(const HeadId& id) const { return heads.count(id) != 0; }
};

/// Saliency probability at (height, width) from the final decoder head.
torch::Tensor final_prediction(const ForwardOutputs& outputs, int64_t height, int64_t width);
torch::Tensor final_logits(const ForwardOutputs& outputs, int64_t height, int64_t width);

struct EncoderOutput {
  torch::Tensor global;  // AGLRFE (or stand-in) output
  torch::Tensor local;   // ALPM (or stand-in) output
  torch::Tensor merged;  // CFM (or stand-in) output
};

struct EncoderStageImpl : torch::nn::Module {
  EncoderStageImpl(int in_channels, int out_channels, const ModelConfig& cfg, int stage);
  EncoderOutput forward(const torch::Tensor& x);

  Aglrfe aglrfe{nullptr};
  Alpm alpm{nullptr};
  Cfm cfm{nullptr};
  DownProjection global_standin{nullptr};
  DownProjection local_standin{nullptr};
  ConvBlock merge_standin{nullptr};
};
TORCH_MODULE(EncoderStage);

/// The full encoder-decoder network. Stem at input resolution, encoder stages
/// halve the resolution once each, decoder stages restore it.
class SodaNetImpl : public torch::nn::Module {
public:
  explicit SodaNetImpl(ModelConfig cfg);

  /// image: (B,3,H,W) with H,W divisible by config().spatial_divisor().
  ForwardOutputs forward(const torch::Tensor& image);

  const ModelConfig& config() const { return cfg_; }
  void attach_trace(const std::shared_ptr<ShapeTrace>& trace);

  ConvBlock stem{nullptr};
  torch::nn::ModuleList encoders{nullptr};
  torch::nn::ModuleList decoders{nullptr};
  torch::nn::ModuleDict saliency_heads{nullptr};
  torch::nn::ModuleDict contour_heads{nullptr};

private:
  ModelConfig cfg_;
};
TORCH_MODULE(SodaNet);

/// Number of trainable scalars.
int64_t parameter_count(const torch::nn::Module& module);

}  // namespace soda::model
