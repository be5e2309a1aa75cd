#pragma once

#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "soda/model/network.hpp"

namespace soda::supervision {

inline constexpr double kIouEpsilon = 1e-6;
inline constexpr double kDiceSmoothing = 1.0;
inline constexpr double kContourBceWeight = 0.001;
/// Background weight during COCO pre-training and DUTS fine-tuning.
inline constexpr double kBetaPretrain = 1.0;
inline constexpr double kBetaFinetune = 0.5;

struct WeightMaps {
  torch::Tensor alpha_fg;  // 31x31 window maximum of the ground truth
  torch::Tensor alpha_bg;  // 1 - ground truth
};

/// 31x31 sliding maximum over every trailing (H,W) plane. No gradient.
torch::Tensor fg_weight_map(const torch::Tensor& gt);
torch::Tensor bg_ground_truth(const torch::Tensor& gt);
/// Background logits are the negated foreground logits, so that
/// sigmoid(bg) == 1 - sigmoid(fg).
torch::Tensor background_logits(const torch::Tensor& fg_logits);
WeightMaps weight_maps(const torch::Tensor& gt);

// Elementary losses. All inputs are (B,1,H,W) (or any matching shapes) and the
// result is a scalar tensor. BCE and L1 average over every element; IoU and
// dice are computed per sample and averaged over the batch.

/// mean(alpha * BCE(sigmoid(logits), gt)) in the stable logit-space form.
torch::Tensor weighted_bce(const torch::Tensor& logits, const torch::Tensor& gt,
                           const torch::Tensor& alpha);
/// 1 - (sum(a*p*g) + eps) / (sum(a*(p + g - p*g)) + eps), eps = 1e-6. The
/// epsilon sits in both terms so an all-zero instance scores 0.
torch::Tensor weighted_iou(const torch::Tensor& probs, const torch::Tensor& gt,
                           const torch::Tensor& alpha);
torch::Tensor weighted_l1(const torch::Tensor& probs, const torch::Tensor& gt,
                          const torch::Tensor& alpha);
/// 1 - (2*sum(p*g) + 1) / (sum(p) + sum(g) + 1).
torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& gt);

struct SaliencyLoss {
  torch::Tensor fg;
  torch::Tensor bg;
  torch::Tensor total;  // fg + beta * bg
};

/// Foreground/background supervision of one saliency head. `gt` must already
/// be at the head's resolution; weight maps are derived from it.
SaliencyLoss saliency_head_loss(const torch::Tensor& fg_logits, const torch::Tensor& gt,
                                double beta, std::string_view head = "");

/// 0.001 * BCE + dice, unweighted.
torch::Tensor contour_head_loss(const torch::Tensor& contour_logits,
                                const torch::Tensor& contour_gt, std::string_view head = "");

/// Ground truth for a head of size (height, width). Returned unchanged at the
/// input resolution; otherwise the saliency map is bilinearly resized and
/// binarized at 0.5 and the contour is re-derived from it.
struct HeadTargets {
  torch::Tensor gt;
  torch::Tensor contour;
};
HeadTargets targets_at(const torch::Tensor& gt, const torch::Tensor& contour_gt, int64_t height,
                       int64_t width);

struct LossBreakdown {
  struct Components {
    double fg = 0.0;
    double bg = 0.0;
    double contour = 0.0;
  };
  std::map<model::HeadId, Components> per_head;
  double total = 0.0;
  double beta = 0.0;
  /// Differentiable total; `total` is its value.
  torch::Tensor objective;

  /// Sum over saliency heads of fg + beta * bg plus the contour terms.
  double recombine() const;
  nlohmann::json to_json() const;
};

/// Sum of saliency losses over every saliency head and contour losses over
/// every contour head in `expected`. Throws ShapeError listing absent heads.
LossBreakdown total_loss(const model::ForwardOutputs& outputs, const torch::Tensor& gt,
                         const torch::Tensor& contour_gt, double beta,
                         const std::vector<model::HeadId>& expected = model::expected_heads());

}  // namespace soda::supervision
