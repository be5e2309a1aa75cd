#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "soda/errors.hpp"
#include "soda/model/network.hpp"
#include "soda/supervision/losses.hpp"
#include "soda/tensor_grid.hpp"

using namespace soda;
using namespace soda::supervision;

namespace {

struct Instance {
  torch::Tensor logits, gt, alpha;
};

Instance random_instance(uint64_t seed, int batch = 2, int side = 8) {
  std::mt19937_64 rng(seed);
  std::vector<torch::Tensor> gts;
  for (int b = 0; b < batch; ++b) gts.push_back(to_tensor(oracle::random_binary(side, side, rng, 0.4)));
  auto gt = torch::stack(gts).unsqueeze(1).to(torch::kDouble);
  torch::manual_seed(seed);
  auto logits = torch::randn({batch, 1, side, side}, torch::kDouble) * 3;
  auto alpha = torch::rand({batch, 1, side, side}, torch::kDouble) * 2;
  return {logits, gt, alpha};
}

double rel_err(double a, long double b) {
  return std::fabs(a - static_cast<double>(b)) / std::max(std::fabs(static_cast<double>(b)), 1e-12);
}

}  // namespace

TEST(Losses, ElementaryLossesMatchScalarOracles) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_instance(seed);
    const auto p = torch::sigmoid(in.logits);
    EXPECT_LT(rel_err(weighted_bce(in.logits, in.gt, in.alpha).item<double>(),
                      oracle::weighted_bce(in.logits, in.gt, in.alpha)),
              1e-6);
    EXPECT_LT(rel_err(weighted_iou(p, in.gt, in.alpha).item<double>(),
                      oracle::weighted_iou(p, in.gt, in.alpha)),
              1e-6);
    EXPECT_LT(rel_err(weighted_l1(p, in.gt, in.alpha).item<double>(),
                      oracle::weighted_l1(p, in.gt, in.alpha)),
              1e-6);
    EXPECT_LT(rel_err(dice_loss(p, in.gt).item<double>(), oracle::dice(p, in.gt)), 1e-6);
  }
}

TEST(Losses, BceIsStableForLargeLogits) {
  auto logits = torch::tensor({-200.0, 200.0, 0.0}, torch::kDouble).reshape({1, 1, 1, 3});
  auto gt = torch::tensor({0.0, 1.0, 1.0}, torch::kDouble).reshape({1, 1, 1, 3});
  auto v = weighted_bce(logits, gt, torch::ones_like(gt)).item<double>();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, std::log(2.0) / 3, 1e-12);
}

TEST(Losses, IouOfEmptyInstanceIsZero) {
  auto z = torch::zeros({1, 1, 4, 4}, torch::kDouble);
  EXPECT_EQ(weighted_iou(z, z, torch::ones_like(z)).item<double>(), 0.0);
  EXPECT_EQ(dice_loss(z, z).item<double>(), 0.0);
}

TEST(Losses, DiceExamples) {
  auto ones = torch::ones({1, 1, 4, 4}, torch::kDouble);
  auto zeros = torch::zeros({1, 1, 4, 4}, torch::kDouble);
  EXPECT_NEAR(dice_loss(ones, ones).item<double>(), 0.0, 1e-12);
  EXPECT_NEAR(dice_loss(zeros, ones).item<double>(), 1.0 - 1.0 / 17.0, 1e-12);
}

TEST(Losses, BackgroundIsComplementOfForeground) {
  torch::manual_seed(1);
  auto x = torch::randn({4, 1, 16, 16}, torch::kDouble) * 10;
  auto s = torch::sigmoid(x) + torch::sigmoid(background_logits(x));
  EXPECT_LT((s - 1).abs().max().item<double>(), 1e-7);
  auto gt = (torch::rand({4, 1, 16, 16}) > 0.5).to(torch::kDouble);
  EXPECT_TRUE(torch::equal(bg_ground_truth(bg_ground_truth(gt)), gt));
}

TEST(Losses, WeightMapsMatchDefinition) {
  std::mt19937_64 rng(9);
  const auto m = oracle::random_binary(40, 40, rng, 0.01);
  auto gt = to_tensor(m).reshape({1, 1, 40, 40});
  const auto w = weight_maps(gt);
  EXPECT_TRUE(torch::equal(w.alpha_fg[0][0], to_tensor(oracle::window_max(m, 31))));
  EXPECT_TRUE(torch::equal(w.alpha_bg, 1 - gt));
}

TEST(Losses, SaturatedCorrectPredictionIsNearZero) {
  std::mt19937_64 rng(2);
  auto gt = to_tensor(oracle::random_rectangles(16, 16, rng)).reshape({1, 1, 16, 16});
  auto logits = (gt * 2 - 1) * 30;
  auto s = saliency_head_loss(logits, gt, 1.0);
  EXPECT_LT(s.total.item<float>(), 1e-3);
  auto contour = torch::zeros_like(gt);
  contour[0][0][3][3] = 1;
  EXPECT_LT(contour_head_loss((contour * 2 - 1) * 30, contour).item<float>(), 1e-3);
}

TEST(Losses, HeadLossCombinesSides) {
  auto in = random_instance(4, 1, 8);
  auto s = saliency_head_loss(in.logits, in.gt, 0.5);
  EXPECT_NEAR(s.total.item<double>(), s.fg.item<double>() + 0.5 * s.bg.item<double>(), 1e-12);
  auto alpha_fg = fg_weight_map(in.gt);
  auto p = torch::sigmoid(in.logits);
  const long double fg = oracle::weighted_bce(in.logits, in.gt, alpha_fg) +
                         oracle::weighted_iou(p, in.gt, alpha_fg) +
                         oracle::weighted_l1(p, in.gt, alpha_fg);
  EXPECT_LT(rel_err(s.fg.item<double>(), fg), 1e-6);
  auto alpha_bg = 1 - in.gt;
  auto q = torch::sigmoid(-in.logits);
  const long double bg = oracle::weighted_bce(-in.logits, 1 - in.gt, alpha_bg) +
                         oracle::weighted_iou(q, 1 - in.gt, alpha_bg) +
                         oracle::weighted_l1(q, 1 - in.gt, alpha_bg);
  EXPECT_LT(rel_err(s.bg.item<double>(), bg), 1e-6);
}

TEST(Losses, HeadShapeMismatchNamesHead) {
  try {
    saliency_head_loss(torch::zeros({1, 1, 4, 4}), torch::zeros({1, 1, 8, 8}), 1.0, "CFM2/sal");
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("CFM2/sal"), std::string::npos);
  }
}

TEST(Losses, TargetsAtHeadResolution) {
  auto gt = torch::zeros({1, 1, 8, 8});
  gt.index_put_({0, 0, torch::indexing::Slice(0, 4), torch::indexing::Slice(0, 4)}, 1.0);
  auto contour = torch::zeros_like(gt);
  auto same = targets_at(gt, contour, 8, 8);
  EXPECT_TRUE(torch::equal(same.gt, gt));
  auto half = targets_at(gt, contour, 4, 4);
  auto expect = torch::zeros({1, 1, 4, 4});
  expect.index_put_({0, 0, torch::indexing::Slice(0, 2), torch::indexing::Slice(0, 2)}, 1.0);
  EXPECT_TRUE(torch::equal(half.gt, expect));
  EXPECT_GT(half.contour.sum().item<float>(), 0);
}

TEST(Losses, TotalLossSumsHeadsAndRecombines) {
  auto cfg = model::toy_config();
  cfg.input_size = {16, 16};
  model::SodaNet net(cfg);
  auto image = torch::rand({2, 3, 16, 16});
  auto gt = (torch::rand({2, 1, 16, 16}) > 0.5).to(torch::kFloat);
  auto contour = (torch::rand({2, 1, 16, 16}) > 0.8).to(torch::kFloat);
  const auto out = net->forward(image);
  const auto loss = total_loss(out, gt, contour, 0.5);
  EXPECT_EQ(loss.per_head.size(), 14u);
  EXPECT_NEAR(loss.recombine(), loss.total, 1e-4 * std::max(1.0, loss.total));
  EXPECT_NEAR(loss.objective.item<double>(), loss.total, 1e-6);
  const auto j = loss.to_json();
  EXPECT_EQ(j.at("heads").size(), 14u);
  EXPECT_TRUE(j.at("heads").contains("CFMD2/sal"));
}

TEST(Losses, MissingHeadsAreListed) {
  auto cfg = model::toy_config();
  cfg.input_size = {16, 16};
  model::SodaNet net(cfg);
  auto out = net->forward(torch::rand({1, 3, 16, 16}));
  out.heads.erase(model::HeadId{model::Site::alpm, 2, model::HeadKind::saliency});
  auto gt = torch::zeros({1, 1, 16, 16});
  try {
    total_loss(out, gt, gt, 1.0);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("ALPM2/sal"), std::string::npos) << e.what();
  }
}
