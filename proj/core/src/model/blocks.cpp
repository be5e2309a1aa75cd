#include "soda/model/blocks.hpp"

#include <cmath>
#include <sstream>

#include "soda/errors.hpp"

namespace F = torch::nn::functional;

namespace soda::model {

namespace {

std::string shape_str(const torch::Tensor& t) {
  std::ostringstream out;
  out << t.sizes();
  return out.str();
}

}  // namespace

void ShapeTrace::record(const std::string& site, torch::IntArrayRef shape) {
  std::lock_guard lock(mutex_);
  entries_.emplace_back(site, shape.vec());
}

std::vector<std::pair<std::string, std::vector<int64_t>>> ShapeTrace::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

void ShapeTrace::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

torch::Tensor resize_bilinear(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor max_pool2(const torch::Tensor& x) {
  return F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2));
}

ConvBlockImpl::ConvBlockImpl(int in, int out, int dilation, Norm norm, int groups, int units)
    : in_channels(in), out_channels(out) {
  if (in <= 0 || out <= 0 || dilation < 1 || units < 1)
    throw ConfigError("conv block needs positive widths, dilation >= 1 and units >= 1");
  if (norm == Norm::group && out % groups != 0)
    throw ConfigError("group norm: " + std::to_string(out) + " channels not divisible by " +
                      std::to_string(groups) + " groups");
  body = torch::nn::Sequential();
  for (int u = 0; u < units; ++u) {
    body->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(u == 0 ? in : out, out, 3)
                                          .padding(dilation)
                                          .dilation(dilation)
                                          .bias(true)));
    if (norm == Norm::batch)
      body->push_back(torch::nn::BatchNorm2d(out));
    else
      body->push_back(torch::nn::GroupNorm(torch::nn::GroupNormOptions(groups, out)));
    body->push_back(torch::nn::GELU());
  }
  register_module("body", body);
}

torch::Tensor ConvBlockImpl::forward(torch::Tensor x) {
  if (x.dim() != 4 || x.size(1) != in_channels)
    throw ShapeError("conv block expects (B," + std::to_string(in_channels) + ",H,W), got " +
                     shape_str(x));
  return body->forward(x);
}

ConvBlock conv_block_b(int in, int out, int dilation) {
  return ConvBlock(in, out, dilation, Norm::batch);
}

ConvBlock conv_block_g(int in, int out, int dilation, int groups) {
  return ConvBlock(in, out, dilation, Norm::group, groups);
}

SelfAttentionImpl::SelfAttentionImpl(int channels, int dk_width, std::string site)
    : dk(dk_width > 0 ? dk_width : channels), site_(std::move(site)) {
  auto proj = [](int in, int out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1).bias(true));
  };
  query = register_module("query", proj(channels, dk));
  key = register_module("key", proj(channels, dk));
  value = register_module("value", proj(channels, channels));
}

torch::Tensor SelfAttentionImpl::scores(const torch::Tensor& x) {
  if (trace_) trace_->record(site_, x.sizes());
  const auto b = x.size(0);
  const auto n = x.size(2) * x.size(3);
  auto q = query->forward(x).reshape({b, dk, n}).transpose(1, 2);  // (B,N,dk)
  auto k = key->forward(x).reshape({b, dk, n});                    // (B,dk,N)
  auto logits = torch::bmm(q, k) / std::sqrt(static_cast<double>(dk));
  if (!torch::isfinite(logits).all().item<bool>())
    throw NumericError("non-finite attention logits at " + site_);
  return logits;
}

torch::Tensor SelfAttentionImpl::weights(const torch::Tensor& x) {
  return torch::softmax(scores(x), -1);
}

torch::Tensor SelfAttentionImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  auto attn = torch::softmax(scores(x), -1);
  auto v = value->forward(x).reshape({b, c, h * w}).transpose(1, 2);  // (B,N,C)
  return torch::bmm(attn, v).transpose(1, 2).reshape({b, c, h, w});
}

AglrfeImpl::AglrfeImpl(int in, int out, std::vector<int> dils, int stride, int dk, int groups,
                       const std::string& site)
    : dilations(std::move(dils)), pool_stride(stride) {
  if (dilations.empty()) throw ConfigError(site + ": AGLRFE needs at least one dilation");
  feat = register_module("feat", conv_block_b(in, out));
  attn_refine = register_module("attn_refine", conv_block_b(out, out));
  attention = register_module("attention", SelfAttention(out, dk, site + ".attention"));
  gate_reduce = register_module("gate_reduce", conv_block_b(out, 1));
  branches = register_module("branches", torch::nn::ModuleList());
  for (int d : dilations) branches->push_back(conv_block_g(out, out, d, groups));
  fuse = register_module("fuse",
                         conv_block_b(out * static_cast<int>(dilations.size() + 1), out));
}

AglrfeTrace AglrfeImpl::forward_trace(const torch::Tensor& x) {
  AglrfeTrace t;
  t.feat = feat->forward(x);
  auto pooled = F::avg_pool2d(t.feat, F::AvgPool2dFuncOptions(pool_stride).stride(pool_stride));
  t.attention = attention->forward(attn_refine->forward(pooled));
  auto up = resize_bilinear(t.attention, t.feat.size(2), t.feat.size(3));
  t.gate = torch::sigmoid(gate_reduce->forward(up));
  std::vector<torch::Tensor> parts;
  for (const auto& branch : *branches) {
    auto f = branch->as<ConvBlock>()->forward(t.feat);
    auto g = f + f * t.gate;
    t.branch.push_back(f);
    t.gated.push_back(g);
    parts.push_back(g);
  }
  parts.push_back(t.feat);
  t.output = fuse->forward(max_pool2(torch::cat(parts, 1)));
  return t;
}

torch::Tensor AglrfeImpl::forward(const torch::Tensor& x) { return forward_trace(x).output; }

AlpmImpl::AlpmImpl(int in, int out, int dk, const std::string& site) {
  feat = register_module("feat", conv_block_b(in, out));
  attention = register_module("attention", SelfAttention(out, dk, site + ".attention"));
  merge = register_module("merge", conv_block_b(out + in, out));
  shortcut = register_module("shortcut", conv_block_b(in, out));
}

AlpmTrace AlpmImpl::forward_trace(const torch::Tensor& x) {
  if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0)
    throw ShapeError("ALPM input sides must be divisible by 4, got " + shape_str(x));
  AlpmTrace t;
  t.fx = max_pool2(x);
  t.feat = feat->forward(max_pool2(t.fx));
  t.attention = attention->forward(t.feat);
  auto up = resize_bilinear(t.feat + t.attention, t.fx.size(2), t.fx.size(3));
  t.fy = merge->forward(torch::cat({up, t.fx}, 1));
  t.output = shortcut->forward(t.fx) + t.fy;
  return t;
}

torch::Tensor AlpmImpl::forward(const torch::Tensor& x) { return forward_trace(x).output; }

CfmImpl::CfmImpl(int global_channels, int local_channels, int out, int groups, int depth) {
  body = register_module(
      "body", ConvBlock(global_channels + local_channels, out, 1, Norm::group, groups, depth));
}

torch::Tensor CfmImpl::forward(const torch::Tensor& global_feat, const torch::Tensor& local_feat) {
  if (global_feat.size(0) != local_feat.size(0) || global_feat.size(2) != local_feat.size(2) ||
      global_feat.size(3) != local_feat.size(3))
    throw ShapeError("CFM inputs differ in batch/resolution: " + shape_str(global_feat) +
                     " vs " + shape_str(local_feat));
  return body->forward(torch::cat({global_feat, local_feat}, 1));
}

MrffamImpl::MrffamImpl(int c, std::vector<int> dils, int groups)
    : dilations(std::move(dils)), channels(c) {
  if (dilations.empty()) throw ConfigError("MRFFAM needs at least one dilation");
  const int n = static_cast<int>(dilations.size());
  if (c % n != 0)
    throw ConfigError("MRFFAM: " + std::to_string(c) + " channels not divisible into " +
                      std::to_string(n) + " chunks");
  chunks = register_module("chunks", torch::nn::ModuleList());
  for (int d : dilations) chunks->push_back(conv_block_g(c / n, c / n, d, groups));
  refine = register_module("refine", conv_block_b(2 * c, c));
}

torch::Tensor MrffamImpl::aggregate(const torch::Tensor& x) {
  if (x.size(1) != channels)
    throw ShapeError("MRFFAM expects " + std::to_string(channels) + " channels, got " +
                     shape_str(x));
  auto pieces = x.chunk(static_cast<int64_t>(dilations.size()), 1);
  std::vector<torch::Tensor> parts;
  for (std::size_t i = 0; i < pieces.size(); ++i)
    parts.push_back(chunks[i]->as<ConvBlock>()->forward(pieces[i]));
  parts.push_back(x);
  return torch::cat(parts, 1);
}

torch::Tensor MrffamImpl::forward(const torch::Tensor& x) { return refine->forward(aggregate(x)); }

DownProjectionImpl::DownProjectionImpl(int in, int out) {
  proj = register_module("proj", conv_block_b(in, out));
}

torch::Tensor DownProjectionImpl::forward(const torch::Tensor& x) {
  return proj->forward(max_pool2(x));
}

DecoderStageImpl::DecoderStageImpl(int in, int skip, int out, std::vector<int> dilations,
                                   int groups, bool ablate_mrffam, int refine_depth) {
  if (ablate_mrffam)
    mrffam_standin = register_module("mrffam_standin", conv_block_b(in, in));
  else
    mrffam = register_module("mrffam", Mrffam(in, std::move(dilations), groups));
  refine = register_module("refine",
                           ConvBlock(in + skip, out, 1, Norm::group, groups, refine_depth));
}

DecoderOutput DecoderStageImpl::forward(const torch::Tensor& x, const torch::Tensor& skip) {
  if (skip.size(0) != x.size(0) || skip.size(2) != 2 * x.size(2) ||
      skip.size(3) != 2 * x.size(3))
    throw ShapeError("decoder skip must be twice the input resolution: input " + shape_str(x) +
                     ", skip " + shape_str(skip));
  DecoderOutput out;
  out.mrffam = mrffam ? mrffam->forward(x) : mrffam_standin->forward(x);
  auto up = resize_bilinear(out.mrffam + x, skip.size(2), skip.size(3));
  out.output = refine->forward(torch::cat({up, skip}, 1));
  return out;
}

}  // namespace soda::model
