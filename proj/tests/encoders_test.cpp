#include <gtest/gtest.h>

#include <cmath>

#include "mtvqa/encoders.hpp"
#include "mtvqa/errors.hpp"
#include "mtvqa/ops.hpp"
#include "support.hpp"

namespace mtvqa {
namespace {

using testing::max_grad_error;
using testing::random_tensor;
using Td = Tensor<double>;

TEST(Embed, LookupAndErrors) {
  Rng rng(1);
  auto table = random_tensor(rng, {6, 4});
  const std::vector<std::int32_t> none;
  EXPECT_EQ(embed_tokens<double>(none, table).shape(), (Shape{0, 4}));
  const std::vector<std::int32_t> rep{3, 1, 3};
  auto e = embed_tokens<double>(rep, table);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(e.at(0, c), e.at(2, c));
    EXPECT_EQ(e.at(1, c), table.at(1, c));
  }
  const std::vector<std::int32_t> bad{0, 6};
  try {
    embed_tokens<double>(bad, table);
    FAIL();
  } catch (const IndexError& err) {
    EXPECT_NE(std::string(err.what()).find("6"), std::string::npos);
  }
}

TEST(Embed, GradientCountsLookups) {
  Rng rng(2);
  auto table = random_tensor(rng, {5, 3});
  const std::vector<std::int32_t> ids{4, 0, 4, 4, 2};
  backward(ops::sum(embed_tokens<double>(ids, table)));
  const double counts[] = {1, 0, 1, 0, 3};
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(table.grad()[r * 3 + c], counts[r]);
}

TEST(ProjectVideo, ZeroWeightsRangeAndGradients) {
  Rng rng(3);
  auto v = random_tensor(rng, {4, 6}, -50, 50, false);
  LinearParams<double> zero{Td::zeros({6, 3}, true), Td::zeros({3}, true)};
  const auto out0 = project_video(v, zero);
  for (double x : out0.values()) EXPECT_EQ(x, 0.0);

  LinearParams<double> p{random_tensor(rng, {6, 3}, -1, 1), random_tensor(rng, {3}, -1, 1)};
  // Strictly inside (-1, 1) until tanh saturates in floating point.
  const auto moderate = project_video(random_tensor(rng, {4, 6}, -2, 2, false), p);
  for (double x : moderate.values()) {
    EXPECT_GT(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
  const auto huge = project_video(v, p);
  for (double x : huge.values()) EXPECT_LE(std::abs(x), 1.0);
  auto small = random_tensor(rng, {4, 6}, -1, 1, false);
  EXPECT_LT(max_grad_error({p.weight, p.bias}, [&] { return ops::sum(project_video(small, p)); }), 1e-4);
  EXPECT_THROW(project_video(Td::zeros({4, 5}), p), DimensionError);
  EXPECT_THROW(project_video(Td::zeros({0, 6}), p), EmptySequenceError);
}

TEST(ParamInit, ForgetBiasAndBounds) {
  const ParamInitializer init(17);
  auto l = init.lstm<double>("x", 5, 4);
  EXPECT_EQ(l.w_input.shape(), (Shape{5, 16}));
  EXPECT_EQ(l.w_hidden.shape(), (Shape{4, 16}));
  for (std::size_t j = 4; j < 8; ++j) EXPECT_EQ(l.bias[j], 1.0);
  const double k = 1 / std::sqrt(5.0);
  for (double x : l.w_input.values()) EXPECT_LE(std::abs(x), k);
  // Streams of values depend on the name only, so adding a tensor does not
  // shift the others.
  auto again = ParamInitializer(17).lstm<double>("x", 5, 4);
  for (std::size_t i = 0; i < l.w_input.numel(); ++i) EXPECT_EQ(l.w_input[i], again.w_input[i]);
  auto other = init.lstm<double>("y", 5, 4);
  EXPECT_NE(l.w_input[0], other.w_input[0]);
}

class BiLstm : public ::testing::Test {
 protected:
  ParamInitializer init{5};
  BiLstmParams<double> p = init.bilstm<double>("enc", 3, 2);
};

TEST_F(BiLstm, ShapeAndSingleStep) {
  Rng rng(4);
  auto x = random_tensor(rng, {1, 3}, -2, 2, false);
  auto y = bilstm_encode(x, p);
  ASSERT_EQ(y.shape(), (Shape{1, 4}));
  auto f = ops::lstm(x, p.forward.w_input, p.forward.w_hidden, p.forward.bias, false);
  auto b = ops::lstm(x, p.backward.w_input, p.backward.w_hidden, p.backward.bias, false);
  EXPECT_EQ(y[0], f[0]);
  EXPECT_EQ(y[1], f[1]);
  EXPECT_EQ(y[2], b[0]);
  EXPECT_EQ(y[3], b[1]);
  EXPECT_THROW(bilstm_encode(Td::zeros({0, 3}), p), EmptySequenceError);
  for (std::size_t T : {1u, 4u, 9u}) EXPECT_EQ(bilstm_encode(Td::zeros({T, 3}), p).shape(), (Shape{T, 4}));
}

TEST_F(BiLstm, ReversingInputSwapsHalves) {
  BiLstmParams<double> tied{p.forward, p.forward};
  Rng rng(5);
  auto x = random_tensor(rng, {6, 3}, -2, 2, false);
  std::vector<double> rv;
  for (std::size_t t = 6; t-- > 0;)
    for (std::size_t c = 0; c < 3; ++c) rv.push_back(x.at(t, c));
  auto y = bilstm_encode(x, tied);
  auto yr = bilstm_encode(Td::from({6, 3}, rv), tied);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(y.at(t, c), yr.at(5 - t, 2 + c), 1e-15);
}

TEST_F(BiLstm, GradcheckThreeSteps) {
  Rng rng(6);
  auto x = random_tensor(rng, {3, 3});
  auto w = random_tensor(rng, {3, 4}, -1, 1, false);
  auto f = [&] { return ops::sum(ops::mul(bilstm_encode(x, p), w)); };
  std::vector<Td> all{x, p.forward.w_input, p.forward.w_hidden, p.forward.bias,
                      p.backward.w_input, p.backward.w_hidden, p.backward.bias};
  EXPECT_LT(max_grad_error(all, f, 1e-3), 1e-4);
}

TEST_F(BiLstm, RepeatEncodeIsBitwiseIdentical) {
  auto pf = ParamInitializer(5).bilstm<float>("enc", 3, 2);
  Rng rng(7);
  auto x = random_tensor<float>(rng, {8, 3}, -2, 2, false);
  auto a = bilstm_encode(x, pf), b = bilstm_encode(x, pf);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(ModelConfigCheck, RejectsBadValues) {
  ModelConfig m;
  m.vocab_size = 10;
  EXPECT_NO_THROW(m.validate());
  auto bad = m;
  bad.hidden_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = m;
  bad.margin = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = m;
  bad.streams.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(stream_from_string("audio"), ConfigError);
  EXPECT_EQ(m.fused_width(), 10 * m.hidden_size);
  EXPECT_EQ(m.pooled_width(), 10 * m.hidden_size);
}

}  // namespace
}  // namespace mtvqa
