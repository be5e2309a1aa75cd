#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace soda::model {

/// Records the input shape seen by each attention site. Attach one to a block
/// to inspect where attention runs; leave detached in production.
class ShapeTrace {
public:
  void record(const std::string& site, torch::IntArrayRef shape);
  std::vector<std::pair<std::string, std::vector<int64_t>>> entries() const;
  void clear();

private:
  mutable std::mutex mutex_;
  std::vector<std::pair<std::string, std::vector<int64_t>>> entries_;
};

enum class Norm { batch, group };

/// `units` stacked [3x3 dilated conv -> norm -> GELU]. padding == dilation so
/// the spatial size is preserved.
struct ConvBlockImpl : torch::nn::Module {
  ConvBlockImpl(int in_channels, int out_channels, int dilation, Norm norm, int groups = 4,
                int units = 2);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::Sequential body{nullptr};
  int in_channels;
  int out_channels;
};
TORCH_MODULE(ConvBlock);

/// Two [conv -> BatchNorm -> GELU] units.
ConvBlock conv_block_b(int in_channels, int out_channels, int dilation = 1);
/// Two [conv -> GroupNorm -> GELU] units.
ConvBlock conv_block_g(int in_channels, int out_channels, int dilation, int groups);

/// Single-head scaled dot-product attention over the flattened spatial grid.
/// Q, K and V come from independent 3x3 convolutions; the output keeps the
/// input channel count.
struct SelfAttentionImpl : torch::nn::Module {
  SelfAttentionImpl(int channels, int dk, std::string site);

  torch::Tensor forward(const torch::Tensor& x);
  /// Row-stochastic (B, HW, HW) attention matrix for `x`.
  torch::Tensor weights(const torch::Tensor& x);

  void attach_trace(std::shared_ptr<ShapeTrace> trace) { trace_ = std::move(trace); }
  const std::string& site() const { return site_; }

  torch::nn::Conv2d query{nullptr}, key{nullptr}, value{nullptr};
  int dk;

private:
  torch::Tensor scores(const torch::Tensor& x);

  std::string site_;
  std::shared_ptr<ShapeTrace> trace_;
};
TORCH_MODULE(SelfAttention);

struct AglrfeTrace {
  torch::Tensor feat;
  torch::Tensor attention;
  torch::Tensor gate;                 // (B,1,H,W), strictly inside (0,1)
  std::vector<torch::Tensor> branch;  // f_i per dilation
  std::vector<torch::Tensor> gated;   // f_i + f_i * gate
  torch::Tensor output;
};

/// Attention-guided long-range feature extraction. Output is at half the
/// input resolution.
struct AglrfeImpl : torch::nn::Module {
  AglrfeImpl(int in_channels, int out_channels, std::vector<int> dilations, int pool_stride,
             int dk, int groups, const std::string& site);

  torch::Tensor forward(const torch::Tensor& x);
  AglrfeTrace forward_trace(const torch::Tensor& x);

  ConvBlock feat{nullptr};
  ConvBlock attn_refine{nullptr};
  SelfAttention attention{nullptr};
  ConvBlock gate_reduce{nullptr};
  torch::nn::ModuleList branches{nullptr};
  ConvBlock fuse{nullptr};
  std::vector<int> dilations;
  int pool_stride;
};
TORCH_MODULE(Aglrfe);

struct AlpmTrace {
  torch::Tensor fx;
  torch::Tensor feat;
  torch::Tensor attention;
  torch::Tensor fy;
  torch::Tensor output;
};

/// Max-pool local branch with a self-attention residual at its coarsest map.
/// Output is at half the input resolution; input sides must be divisible by 4.
struct AlpmImpl : torch::nn::Module {
  AlpmImpl(int in_channels, int out_channels, int dk, const std::string& site);

  torch::Tensor forward(const torch::Tensor& x);
  AlpmTrace forward_trace(const torch::Tensor& x);

  ConvBlock feat{nullptr};
  SelfAttention attention{nullptr};
  ConvBlock merge{nullptr};
  ConvBlock shortcut{nullptr};
};
TORCH_MODULE(Alpm);

/// Cross feature module: concat(global, local) then `depth` conv/GN/GELU units.
struct CfmImpl : torch::nn::Module {
  CfmImpl(int global_channels, int local_channels, int out_channels, int groups, int depth = 3);
  torch::Tensor forward(const torch::Tensor& global_feat, const torch::Tensor& local_feat);

  ConvBlock body{nullptr};
};
TORCH_MODULE(Cfm);

/// Channel-chunked dilated convolutions concatenated with their input and
/// refined back to the input width.
struct MrffamImpl : torch::nn::Module {
  MrffamImpl(int channels, std::vector<int> dilations, int groups);
  torch::Tensor forward(const torch::Tensor& x);
  /// Concatenation of chunk outputs and input, before refinement.
  torch::Tensor aggregate(const torch::Tensor& x);

  torch::nn::ModuleList chunks{nullptr};
  ConvBlock refine{nullptr};
  std::vector<int> dilations;
  int channels;
};
TORCH_MODULE(Mrffam);

/// conv_block_B followed by a 2x2 max-pool; replaces an ablated encoder block.
struct DownProjectionImpl : torch::nn::Module {
  DownProjectionImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);
  ConvBlock proj{nullptr};
};
TORCH_MODULE(DownProjection);

struct DecoderOutput {
  torch::Tensor mrffam;  // branch output at the input resolution of the stage
  torch::Tensor output;  // refined output at twice the input resolution
};

/// MRFFAM and identity paths on x, summed, upsampled x2, concatenated with
/// the skip and refined.
struct DecoderStageImpl : torch::nn::Module {
  DecoderStageImpl(int in_channels, int skip_channels, int out_channels,
                   std::vector<int> dilations, int groups, bool ablate_mrffam,
                   int refine_depth = 2);
  DecoderOutput forward(const torch::Tensor& x, const torch::Tensor& skip);

  Mrffam mrffam{nullptr};
  ConvBlock mrffam_standin{nullptr};
  ConvBlock refine{nullptr};
};
TORCH_MODULE(DecoderStage);

/// Bilinear (align_corners=false) resize to an explicit size.
torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width);
torch::Tensor max_pool2(const torch::Tensor& x);

}  // namespace soda::model
