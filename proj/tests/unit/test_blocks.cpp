#include <gtest/gtest.h>

#include <cmath>

#include "soda/errors.hpp"
#include "soda/model/blocks.hpp"
#include "soda/model/init.hpp"

using namespace soda;
using namespace soda::model;

TEST(ConvBlock, PaddingPreservesShape) {
  torch::manual_seed(0);
  auto b = conv_block_b(16, 8, 1);
  EXPECT_EQ(b->forward(torch::randn({1, 16, 32, 32})).sizes(), (std::vector<int64_t>{1, 8, 32, 32}));
  auto wide = conv_block_b(16, 8, 22);
  EXPECT_EQ(wide->forward(torch::randn({1, 16, 32, 32})).sizes(),
            (std::vector<int64_t>{1, 8, 32, 32}));
  auto g = conv_block_g(32, 12, 6, 4);
  EXPECT_EQ(g->forward(torch::randn({1, 32, 24, 24})).sizes(),
            (std::vector<int64_t>{1, 12, 24, 24}));
}

TEST(ConvBlock, ChannelMismatchIsShapeError) {
  auto b = conv_block_b(16, 8);
  EXPECT_THROW(b->forward(torch::randn({1, 15, 8, 8})), ShapeError);
  EXPECT_THROW(conv_block_g(8, 6, 1, 4), ConfigError);
}

TEST(ConvBlock, ZeroInputInEvalModeGivesConstantMap) {
  auto b = conv_block_b(16, 8);
  init_weights(*b, 1);
  b->eval();
  auto y = b->forward(torch::zeros({1, 16, 12, 12}));
  // Zero bias and identity batch norm: GELU(0) = 0 after both units.
  EXPECT_TRUE(torch::allclose(y, torch::zeros_like(y)));
  auto first = y.flatten()[0].item<float>();
  EXPECT_TRUE((y == first).all().item<bool>());
}

TEST(ConvBlock, GroupNormNormalisesEachGroup) {
  torch::manual_seed(2);
  torch::nn::GroupNorm gn(torch::nn::GroupNormOptions(4, 16));
  auto y = gn->forward(torch::randn({2, 16, 9, 9}) * 3 + 1).reshape({2, 4, -1});
  EXPECT_LT(y.mean(-1).abs().max().item<float>(), 1e-4);
  EXPECT_LT((y.var(-1, false) - 1).abs().max().item<float>(), 1e-3);
}

TEST(ConvBlock, GroupNormBlockHasNoCrossSampleCoupling) {
  torch::manual_seed(3);
  auto g = conv_block_g(8, 8, 2, 4);
  g->train();
  auto x = torch::randn({2, 8, 10, 10});
  auto y = g->forward(x);
  auto swapped = g->forward(torch::stack({x[1], x[0]}));
  EXPECT_TRUE(torch::equal(y[0], swapped[1]));
  EXPECT_TRUE(torch::equal(y[1], swapped[0]));
}

namespace {

void set_identity(torch::nn::Conv2d& conv) {
  torch::NoGradGuard no_grad;
  conv->weight.zero_();
  conv->bias.zero_();
  for (int64_t c = 0; c < conv->weight.size(0); ++c) conv->weight[c][c][1][1] = 1.0;
}

}  // namespace

TEST(SelfAttention, RowsSumToOne) {
  torch::manual_seed(4);
  SelfAttention attn(8, 0, "probe");
  auto w = attn->weights(torch::randn({1, 8, 6, 6}));
  EXPECT_EQ(w.sizes(), (std::vector<int64_t>{1, 36, 36}));
  EXPECT_LT((w.sum(-1) - 1).abs().max().item<float>(), 1e-5);
}

TEST(SelfAttention, ConstantValuesPassThrough) {
  torch::manual_seed(5);
  SelfAttention attn(4, 0, "probe");
  {
    torch::NoGradGuard no_grad;
    attn->value->weight.zero_();
    attn->value->bias.fill_(0.75);
  }
  auto y = attn->forward(torch::randn({2, 4, 5, 5}));
  EXPECT_TRUE(torch::allclose(y, torch::full_like(y, 0.75), 0, 1e-6));
}

TEST(SelfAttention, MatchesDenseOracleWithIdentityProjections) {
  SelfAttention attn(2, 0, "probe");
  set_identity(attn->query);
  set_identity(attn->key);
  set_identity(attn->value);
  const double x[2][4] = {{0.3, -1.2, 0.8, 0.1}, {1.5, 0.4, -0.6, 0.9}};
  auto input = torch::empty({1, 2, 2, 2}, torch::kDouble);
  for (int c = 0; c < 2; ++c)
    for (int n = 0; n < 4; ++n) input[0][c][n / 2][n % 2] = x[c][n];
  attn->to(torch::kDouble);
  auto y = attn->forward(input);

  for (int n = 0; n < 4; ++n) {
    double logits[4], denom = 0;
    for (int m = 0; m < 4; ++m) {
      logits[m] = (x[0][n] * x[0][m] + x[1][n] * x[1][m]) / std::sqrt(2.0);
    }
    double mx = *std::max_element(logits, logits + 4);
    for (double& l : logits) denom += std::exp(l - mx);
    for (int c = 0; c < 2; ++c) {
      double expect = 0;
      for (int m = 0; m < 4; ++m) expect += std::exp(logits[m] - mx) / denom * x[c][m];
      EXPECT_NEAR(y[0][c][n / 2][n % 2].item<double>(), expect, 1e-6);
    }
  }
}

TEST(SelfAttention, NonFiniteLogitsNameTheSite) {
  SelfAttention attn(2, 0, "AGLRFE1.attention");
  {
    torch::NoGradGuard no_grad;
    attn->query->bias.fill_(std::numeric_limits<float>::infinity());
  }
  try {
    attn->forward(torch::randn({1, 2, 3, 3}));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("AGLRFE1.attention"), std::string::npos);
  }
}

TEST(SelfAttention, NarrowKeyWidthKeepsValueWidth) {
  SelfAttention attn(8, 4, "probe");
  EXPECT_EQ(attn->query->weight.size(0), 4);
  EXPECT_EQ(attn->forward(torch::randn({1, 8, 4, 4})).size(1), 8);
}

TEST(Aglrfe, HalvesResolutionAndGatesInUnitInterval) {
  torch::manual_seed(6);
  Aglrfe block(8, 16, std::vector<int>{1, 2, 3}, 4, 0, 4, "AGLRFE1");
  block->eval();
  auto t = block->forward_trace(torch::randn({2, 8, 16, 16}));
  EXPECT_EQ(t.output.sizes(), (std::vector<int64_t>{2, 16, 8, 8}));
  EXPECT_EQ(t.gate.sizes(), (std::vector<int64_t>{2, 1, 16, 16}));
  EXPECT_TRUE(((t.gate > 0) & (t.gate < 1)).all().item<bool>());
  ASSERT_EQ(t.branch.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_TRUE(torch::allclose(t.gated[i], t.branch[i] * (1 + t.gate)));
}

TEST(Aglrfe, AttentionRunsOnPooledMap) {
  Aglrfe block(4, 8, std::vector<int>{1, 2}, 4, 0, 4, "AGLRFE1");
  auto trace = std::make_shared<ShapeTrace>();
  block->attention->attach_trace(trace);
  block->forward(torch::randn({1, 4, 32, 32}));
  const auto entries = trace->entries();
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].second, (std::vector<int64_t>{1, 8, 8, 8}));
}

TEST(Alpm, OutputAtHalfResolution) {
  torch::manual_seed(7);
  Alpm block(8, 16, 0, "ALPM1");
  auto t = block->forward_trace(torch::randn({1, 8, 16, 16}));
  EXPECT_EQ(t.fx.sizes(), (std::vector<int64_t>{1, 8, 8, 8}));
  EXPECT_EQ(t.feat.sizes(), (std::vector<int64_t>{1, 16, 4, 4}));
  EXPECT_EQ(t.output.sizes(), (std::vector<int64_t>{1, 16, 8, 8}));
  EXPECT_THROW(block->forward(torch::randn({1, 8, 18, 18})), ShapeError);
}

TEST(Cfm, MergesBranchesAndRejectsMismatch) {
  Cfm cfm(16, 16, 16, 4);
  EXPECT_EQ(cfm->forward(torch::randn({1, 16, 8, 8}), torch::randn({1, 16, 8, 8})).sizes(),
            (std::vector<int64_t>{1, 16, 8, 8}));
  try {
    cfm->forward(torch::randn({1, 16, 8, 8}), torch::randn({1, 16, 4, 4}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[1, 16, 4, 4]"), std::string::npos) << e.what();
  }
}

TEST(Mrffam, ChunkWidthsAndConcatenation) {
  torch::manual_seed(8);
  Mrffam m(60, std::vector<int>{1, 2, 3, 4, 5}, 4);
  ASSERT_EQ(m->chunks->size(), 5u);
  for (const auto& c : *m->chunks) EXPECT_EQ(c->as<ConvBlock>()->in_channels, 12);
  auto x = torch::randn({1, 60, 12, 12});
  EXPECT_EQ(m->aggregate(x).size(1), 120);
  EXPECT_EQ(m->forward(x).sizes(), x.sizes());
  EXPECT_THROW(Mrffam(62, std::vector<int>{1, 2, 3, 4, 5}, 4), ConfigError);
}

TEST(Mrffam, ChunksAreIsolated) {
  torch::manual_seed(9);
  Mrffam m(16, std::vector<int>{1, 2, 3, 4}, 4);
  m->eval();
  auto x = torch::randn({1, 16, 8, 8});
  auto permuted = x.clone();
  permuted.index_put_({0, torch::indexing::Slice(4, 8)},
                      x.index({0, torch::indexing::Slice(4, 8)}).flip(0));
  auto a = m->aggregate(x), b = m->aggregate(permuted);
  for (int chunk : {0, 2, 3}) {
    auto sl = torch::indexing::Slice(chunk * 4, chunk * 4 + 4);
    EXPECT_TRUE(torch::equal(a.index({0, sl}), b.index({0, sl}))) << "chunk " << chunk;
  }
  auto changed = torch::indexing::Slice(4, 8);
  EXPECT_FALSE(torch::equal(a.index({0, changed}), b.index({0, changed})));
}
