#include <gtest/gtest.h>

#include <cmath>

#include "mtvqa/errors.hpp"
#include "mtvqa/ops.hpp"
#include "mtvqa/qa_head.hpp"
#include "support.hpp"

namespace mtvqa {
namespace {

using testing::max_grad_error;
using testing::random_tensor;
using Td = Tensor<double>;

TEST(Attention, SingleQueryGivesOnesAndBroadcast) {
  Rng rng(1);
  auto c = random_tensor(rng, {4, 6}, -2, 2, false);
  auto q = random_tensor(rng, {1, 6}, -2, 2, false);
  auto att = context_query_attention(c, q);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(att.weights.at(i, 0), 1.0);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(att.attended.at(i, k), q.at(0, k), 1e-15);
  }
}

TEST(Attention, OrthogonalContextIsUniform) {
  auto c = Td::from({2, 4}, {1, 0, 0, 0, 0, 2, 0, 0});
  auto q = Td::from({3, 4}, {0, 0, 1, 0, 0, 0, 3, -1, 0, 0, 0, 5});
  auto w = context_query_attention(c, q).weights;
  for (double x : w.values()) EXPECT_NEAR(x, 1.0 / 3, 1e-15);
}

TEST(Attention, RowsAreConvexCombinationsOfQuery) {
  Rng rng(2);
  auto c = random_tensor(rng, {5, 4}, -2, 2, false);
  auto q = random_tensor(rng, {3, 4}, -2, 2, false);
  auto att = context_query_attention(c, q);
  for (std::size_t i = 0; i < 5; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_GE(att.weights.at(i, j), 0.0);
      row += att.weights.at(i, j);
    }
    EXPECT_NEAR(row, 1.0, 1e-6);
    for (std::size_t k = 0; k < 4; ++k) {
      double mix = 0;
      for (std::size_t j = 0; j < 3; ++j) mix += att.weights.at(i, j) * q.at(j, k);
      EXPECT_NEAR(att.attended.at(i, k), mix, 1e-12);
    }
  }
  EXPECT_THROW(context_query_attention(Td::zeros({0, 4}), q), EmptySequenceError);
  EXPECT_THROW(context_query_attention(c, Td::zeros({0, 4})), EmptySequenceError);
}

TEST(Attention, Gradients) {
  Rng rng(3);
  auto c = random_tensor(rng, {4, 3}), q = random_tensor(rng, {2, 3});
  auto w = random_tensor(rng, {4, 3}, -1, 1, false);
  EXPECT_LT(max_grad_error({c, q}, [&] { return ops::sum(ops::mul(context_query_attention(c, q).attended, w)); }),
            1e-4);
}

TEST(Fuse, BlocksInOrder) {
  auto z = Td::zeros({3, 2});
  auto m = fuse(z, z, z);
  EXPECT_EQ(m.shape(), (Shape{3, 10}));
  for (double x : m.values()) EXPECT_EQ(x, 0.0);

  Rng rng(4);
  auto h = random_tensor(rng, {3, 2}, -2, 2, false), aa = random_tensor(rng, {3, 2}, -2, 2, false);
  auto ones = Td::full({3, 2}, 1.0);
  auto f = fuse(h, ones, aa);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_EQ(f.at(i, 0 + k), h.at(i, k));
      EXPECT_EQ(f.at(i, 2 + k), 1.0);
      EXPECT_EQ(f.at(i, 4 + k), aa.at(i, k));
      EXPECT_EQ(f.at(i, 6 + k), h.at(i, k));
      EXPECT_EQ(f.at(i, 8 + k), h.at(i, k) * aa.at(i, k));
    }
  EXPECT_THROW(fuse(h, Td::zeros({2, 2}), aa), DimensionError);
}

class Head : public ::testing::Test {
 protected:
  static constexpr std::size_t d = 2;
  ParamInitializer init{9};
  StreamHeadParams<double> head{init.bilstm<double>("h.lstm", 10 * d, 5 * d), init.linear<double>("h.score", 10 * d, 1)};
};

TEST_F(Head, IdenticalInputsGiveIdenticalScores) {
  Rng rng(5);
  auto m = random_tensor(rng, {4, 10 * d}, -1, 1, false);
  auto out = score_stream<double>({m, m, m, m, m}, head);
  EXPECT_EQ(out.pooled.shape(), (Shape{5, 10 * d}));
  for (int i = 1; i < 5; ++i) EXPECT_EQ(out.scores[i], out.scores[0]);
}

TEST_F(Head, ZeroWeightsGiveBias) {
  Rng rng(6);
  head.score.weight = Td::zeros({10 * d, 1});
  head.score.bias = Td::from({1}, {0.37});
  std::vector<Td> ms;
  for (int i = 0; i < 5; ++i) ms.push_back(random_tensor(rng, {3, 10 * d}, -1, 1, false));
  const auto out = score_stream(ms, head);
  for (double s : out.scores.values()) EXPECT_EQ(s, 0.37);
  ms.pop_back();
  EXPECT_THROW(score_stream(ms, head), DimensionError);
}

TEST_F(Head, GradcheckThroughStream) {
  Rng rng(7);
  std::vector<Td> ms;
  for (int i = 0; i < 5; ++i) ms.push_back(random_tensor(rng, {3, 10 * d}, -1, 1));
  auto wt = random_tensor(rng, {5}, -1, 1, false);
  auto f = [&] { return ops::sum(ops::mul(score_stream(ms, head).scores, wt)); };
  std::vector<Td> all = ms;
  for (auto* l : {&head.lstm.forward, &head.lstm.backward}) {
    all.push_back(l->w_input);
    all.push_back(l->w_hidden);
    all.push_back(l->bias);
  }
  all.push_back(head.score.weight);
  all.push_back(head.score.bias);
  EXPECT_LT(max_grad_error(all, f, 1e-6), 1e-4);
}

TEST(Combine, PassThroughUniformAndArgmax) {
  auto s = Td::from({5}, {0.3, -1, 2, 0.1, 0.5});
  auto one = combine_streams<double>({s});
  auto ref = ops::softmax_rows(Td::from({1, 5}, {0.3, -1, 2, 0.1, 0.5}));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(one.probs[i], ref[i]);

  auto z = combine_streams<double>({Td::zeros({5}), Td::zeros({5})});
  for (double p : z.probs.values()) EXPECT_NEAR(p, 0.2, 1e-15);

  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_tensor(rng, {5}, -3, 3, false), b = random_tensor(rng, {5}, -3, 3, false);
    auto c = combine_streams<double>({a, b});
    int best_sum = 0, best_p = 0;
    double sum = 0;
    for (int i = 0; i < 5; ++i) {
      if (a[i] + b[i] > a[best_sum] + b[best_sum]) best_sum = i;
      if (c.probs[i] > c.probs[best_p]) best_p = i;
      sum += c.probs[i];
    }
    EXPECT_EQ(best_sum, best_p);
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
  // Zeroing one stream reproduces the other alone.
  auto zeroed = combine_streams<double>({s, Td::zeros({5})});
  for (int i = 0; i < 5; ++i) EXPECT_EQ(zeroed.probs[i], one.probs[i]);
  EXPECT_THROW(combine_streams<double>({}), ConfigError);
}

TEST(QaLoss, UniformPrediction) {
  auto p = Td::full({5}, 0.2);
  EXPECT_NEAR(qa_loss(p, 2).item(), -(std::log(0.2) + 4 * std::log(0.8)), 1e-12);
  EXPECT_NEAR(qa_loss(p, 2).item(), 2.5021, 1e-4);
  EXPECT_NEAR(qa_loss(p, 0, LossForm::Categorical).item(), -std::log(0.2), 1e-12);
}

TEST(QaLoss, PerfectPredictionIsBoundedByClamp) {
  auto p = Td::from({5}, {0, 0, 0, 1, 0});
  const double l = qa_loss(p, 3).item();
  EXPECT_GE(l, 0.0);
  EXPECT_LT(l, 5 * 2e-7);
  EXPECT_THROW(qa_loss(p, 5), IndexError);
}

TEST(QaLoss, MatchesScalarLoopAndGradients) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto raw = random_tensor(rng, {1, 5}, -3, 3, false);
    auto p = ops::reshape(ops::softmax_rows(raw), {5});
    const int y = static_cast<int>(rng.below(5));
    double want = 0;
    for (int i = 0; i < 5; ++i) want -= i == y ? std::log(p[i]) : std::log(1 - p[i]);
    EXPECT_NEAR(qa_loss(p, y).item(), want, 1e-6);
    std::vector<double> pv(p.values().begin(), p.values().end());
    EXPECT_NEAR(qa_loss_value(pv, y, LossForm::SummedBce), want, 1e-12);
  }
  auto logits = random_tensor(rng, {1, 5});
  for (auto form : {LossForm::SummedBce, LossForm::Categorical})
    EXPECT_LT(max_grad_error({logits}, [&] { return qa_loss(ops::reshape(ops::softmax_rows(logits), {5}), 1, form); }),
              1e-6);
}

TEST(QaLoss, DecreasesAsCorrectProbabilityRises) {
  double prev = 1e300;
  for (int k = 1; k < 100; ++k) {
    const double pc = k / 100.0;
    std::vector<double> v(5, (1 - pc) / 4);
    v[1] = pc;
    const double l = qa_loss(Td::from({5}, v), 1).item();
    EXPECT_LT(l, prev);
    prev = l;
  }
}

}  // namespace
}  // namespace mtvqa
