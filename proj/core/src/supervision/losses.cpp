#include "soda/supervision/losses.hpp"

#include <sstream>
#include <utility>

#include "soda/data/contour.hpp"
#include "soda/errors.hpp"
#include "soda/model/blocks.hpp"
#include "soda/supervision/window_max.hpp"
#include "soda/tensor_grid.hpp"

namespace soda::supervision {

namespace {

void check_same(const torch::Tensor& a, const torch::Tensor& b, std::string_view what) {
  if (a.sizes() != b.sizes()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
    throw ShapeError(msg.str());
  }
}

std::vector<int64_t> sample_dims(const torch::Tensor& t) {
  std::vector<int64_t> dims;
  for (int64_t d = 1; d < t.dim(); ++d) dims.push_back(d);
  return dims;
}

// Per-sample sum for batched maps, plain sum for a single plane.
torch::Tensor per_sample_sum(const torch::Tensor& t) {
  if (t.dim() <= 2) return t.sum();
  return t.sum(sample_dims(t));
}

}  // namespace

torch::Tensor fg_weight_map(const torch::Tensor& gt) {
  return map_planes(gt, [](const Map2f& m) { return window_max(m, kForegroundWindow); });
}

torch::Tensor bg_ground_truth(const torch::Tensor& gt) { return 1.0 - gt; }

torch::Tensor background_logits(const torch::Tensor& fg_logits) { return -fg_logits; }

WeightMaps weight_maps(const torch::Tensor& gt) {
  return {fg_weight_map(gt), bg_ground_truth(gt).detach()};
}

torch::Tensor weighted_bce(const torch::Tensor& logits, const torch::Tensor& gt,
                           const torch::Tensor& alpha) {
  check_same(logits, gt, "weighted_bce");
  check_same(logits, alpha, "weighted_bce");
  auto bce = torch::relu(logits) - logits * gt + torch::log1p(torch::exp(-logits.abs()));
  return (alpha * bce).mean();
}

torch::Tensor weighted_iou(const torch::Tensor& probs, const torch::Tensor& gt,
                           const torch::Tensor& alpha) {
  check_same(probs, gt, "weighted_iou");
  check_same(probs, alpha, "weighted_iou");
  auto inter = per_sample_sum(alpha * probs * gt);
  auto uni = per_sample_sum(alpha * (probs + gt - probs * gt));
  return (1.0 - (inter + kIouEpsilon) / (uni + kIouEpsilon)).mean();
}

torch::Tensor weighted_l1(const torch::Tensor& probs, const torch::Tensor& gt,
                          const torch::Tensor& alpha) {
  check_same(probs, gt, "weighted_l1");
  check_same(probs, alpha, "weighted_l1");
  return (alpha * (probs - gt).abs()).mean();
}

torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& gt) {
  check_same(probs, gt, "dice_loss");
  auto num = 2.0 * per_sample_sum(probs * gt) + kDiceSmoothing;
  auto den = per_sample_sum(probs) + per_sample_sum(gt) + kDiceSmoothing;
  return (1.0 - num / den).mean();
}

SaliencyLoss saliency_head_loss(const torch::Tensor& fg_logits, const torch::Tensor& gt,
                                double beta, std::string_view head) {
  if (fg_logits.sizes() != gt.sizes()) {
    std::ostringstream msg;
    msg << "saliency head " << head << ": logits " << fg_logits.sizes()
        << " do not match ground truth " << gt.sizes();
    throw ShapeError(msg.str());
  }
  const auto alpha = weight_maps(gt);
  auto side = [](const torch::Tensor& logits, const torch::Tensor& target,
                 const torch::Tensor& a) {
    auto p = torch::sigmoid(logits);
    return weighted_bce(logits, target, a) + weighted_iou(p, target, a) +
           weighted_l1(p, target, a);
  };
  SaliencyLoss out;
  out.fg = side(fg_logits, gt, alpha.alpha_fg);
  out.bg = side(background_logits(fg_logits), bg_ground_truth(gt), alpha.alpha_bg);
  out.total = out.fg + beta * out.bg;
  return out;
}

torch::Tensor contour_head_loss(const torch::Tensor& logits, const torch::Tensor& contour_gt,
                                std::string_view head) {
  if (logits.sizes() != contour_gt.sizes()) {
    std::ostringstream msg;
    msg << "contour head " << head << ": logits " << logits.sizes()
        << " do not match contour ground truth " << contour_gt.sizes();
    throw ShapeError(msg.str());
  }
  auto ones = torch::ones_like(logits);
  return kContourBceWeight * weighted_bce(logits, contour_gt, ones) +
         dice_loss(torch::sigmoid(logits), contour_gt);
}

HeadTargets targets_at(const torch::Tensor& gt, const torch::Tensor& contour_gt, int64_t height,
                       int64_t width) {
  if (gt.size(-2) == height && gt.size(-1) == width) return {gt, contour_gt};
  torch::NoGradGuard no_grad;
  auto resized = model::resize_bilinear(gt, height, width);
  auto binary = (resized >= 0.5).to(gt.dtype());
  return {binary, data::derive_contour(binary)};
}

double LossBreakdown::recombine() const {
  double sum = 0.0;
  for (const auto& [id, c] : per_head)
    sum += id.kind == model::HeadKind::saliency ? c.fg + beta * c.bg : c.contour;
  return sum;
}

nlohmann::json LossBreakdown::to_json() const {
  nlohmann::json heads = nlohmann::json::object();
  for (const auto& [id, c] : per_head) {
    if (id.kind == model::HeadKind::saliency)
      heads[id.name()] = {{"fg", c.fg}, {"bg", c.bg}};
    else
      heads[id.name()] = {{"contour", c.contour}};
  }
  return {{"total", total}, {"beta", beta}, {"heads", heads}};
}

LossBreakdown total_loss(const model::ForwardOutputs& outputs, const torch::Tensor& gt,
                         const torch::Tensor& contour_gt, double beta,
                         const std::vector<model::HeadId>& expected) {
  std::string missing;
  for (const auto& id : expected)
    if (!outputs.contains(id)) missing += (missing.empty() ? "" : ", ") + id.name();
  if (!missing.empty()) throw ShapeError("total_loss: missing heads " + missing);
  check_same(gt, contour_gt, "total_loss ground truth");

  std::map<std::pair<int64_t, int64_t>, HeadTargets> targets;
  auto targets_for = [&](const torch::Tensor& logits) -> const HeadTargets& {
    const std::pair key{logits.size(-2), logits.size(-1)};
    auto it = targets.find(key);
    if (it == targets.end())
      it = targets.emplace(key, targets_at(gt, contour_gt, key.first, key.second)).first;
    return it->second;
  };

  LossBreakdown out;
  out.beta = beta;
  torch::Tensor objective = torch::zeros({}, gt.options());
  for (const auto& id : expected) {
    const auto& logits = outputs.at(id);
    const auto& t = targets_for(logits);
    auto& c = out.per_head[id];
    if (id.kind == model::HeadKind::saliency) {
      auto l = saliency_head_loss(logits, t.gt, beta, id.name());
      c.fg = l.fg.item<double>();
      c.bg = l.bg.item<double>();
      objective = objective + l.total;
    } else {
      auto l = contour_head_loss(logits, t.contour, id.name());
      c.contour = l.item<double>();
      objective = objective + l;
    }
  }
  out.objective = objective;
  out.total = objective.item<double>();
  return out;
}

}  // namespace soda::supervision
