#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mtvqa/errors.hpp"
#include "mtvqa/ops.hpp"
#include "support.hpp"

namespace mtvqa {
namespace {

using testing::max_grad_error;
using testing::random_tensor;
using Td = Tensor<double>;

Td mat(std::size_t r, std::size_t c, std::vector<double> v, bool grad = false) {
  return Td::from({r, c}, std::move(v), grad);
}

TEST(Matmul, IdentityLeavesMatrixAlone) {
  Rng rng(1);
  auto m = random_tensor(rng, {3, 4}, -2, 2, false);
  auto eye = mat(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto out = ops::matmul(eye, m);
  for (std::size_t i = 0; i < m.numel(); ++i) EXPECT_EQ(out[i], m[i]);

  auto small = ops::matmul(mat(2, 2, {1, 2, 3, 4}), mat(2, 2, {1, 0, 0, 1}));
  EXPECT_EQ(small.at(0, 0), 1);
  EXPECT_EQ(small.at(0, 1), 2);
  EXPECT_EQ(small.at(1, 0), 3);
  EXPECT_EQ(small.at(1, 1), 4);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(2);
  auto a = random_tensor(rng, {4, 5}, -2, 2, false);
  auto b = random_tensor(rng, {5, 3}, -2, 2, false);
  auto c = ops::matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-6);
    }
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    ops::matmul(Td::zeros({2, 3}), Td::zeros({4, 2}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[4x2]"), std::string::npos);
  }
}

TEST(Elementwise, Identities) {
  Rng rng(3);
  auto x = random_tensor(rng, {2, 3}, -2, 2, false);
  auto y = ops::mul(x, Td::full({2, 3}, 1.0));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y[i], x[i]);
  EXPECT_EQ(ops::tanh(Td::scalar(0.0)).item(), 0.0);
  EXPECT_EQ(ops::sigmoid(Td::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(ops::relu(Td::scalar(-1.0)).item(), 0.0);
  EXPECT_THROW(ops::add(Td::zeros({2, 3}), Td::zeros({3, 2})), DimensionError);
  EXPECT_THROW(ops::mul(Td::zeros({3}), Td::zeros({1, 3})), DimensionError);
}

TEST(Softmax, KnownRows) {
  auto u = ops::softmax_rows(mat(1, 3, {0, 0, 0}));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(u[i], 1.0 / 3, 1e-15);
  auto big = ops::softmax_rows(Tensor<float>::from({1, 2}, {1000.f, 0.f}));
  EXPECT_TRUE(std::isfinite(big[0]) && std::isfinite(big[1]));
  EXPECT_NEAR(big[0], 1.0f, 1e-6);
  EXPECT_NEAR(big[1], 0.0f, 1e-6);
}

TEST(Softmax, MatchesLongDoubleOracleAndRowsSumToOne) {
  Rng rng(4);
  auto x = random_tensor<float>(rng, {20, 7}, -10, 10, false);
  auto y = ops::softmax_rows(x);
  for (std::size_t r = 0; r < 20; ++r) {
    long double mx = -1e300L, z = 0;
    for (std::size_t c = 0; c < 7; ++c) mx = std::max<long double>(mx, x.at(r, c));
    for (std::size_t c = 0; c < 7; ++c) z += std::exp(static_cast<long double>(x.at(r, c)) - mx);
    double row = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      const auto want = std::exp(static_cast<long double>(x.at(r, c)) - mx) / z;
      EXPECT_NEAR(y.at(r, c), static_cast<double>(want), 1e-6);
      EXPECT_GE(y.at(r, c), 0.0f);
      EXPECT_LE(y.at(r, c), 1.0f);
      row += y.at(r, c);
    }
    EXPECT_NEAR(row, 1.0, 1e-6);
  }
}

TEST(Maxpool, ExamplesAndColumnScan) {
  auto one = ops::maxpool_time(mat(1, 3, {4, -1, 2}));
  EXPECT_EQ(one[0], 4);
  EXPECT_EQ(one[1], -1);
  EXPECT_EQ(one[2], 2);
  auto two = ops::maxpool_time(mat(2, 2, {1, 5, 3, 2}));
  EXPECT_EQ(two[0], 3);
  EXPECT_EQ(two[1], 5);

  Rng rng(5);
  auto x = random_tensor(rng, {9, 6}, -2, 2, false);
  auto p = ops::maxpool_time(x);
  for (std::size_t c = 0; c < 6; ++c) {
    double m = x.at(0, c);
    for (std::size_t t = 1; t < 9; ++t) m = std::max(m, x.at(t, c));
    EXPECT_EQ(p[c], m);
  }
  EXPECT_THROW(ops::maxpool_time(Td::zeros({0, 3})), EmptySequenceError);
}

TEST(Maxpool, TiesRouteGradientToFirstIndex) {
  auto x = mat(3, 1, {2, 2, 1}, true);
  backward(ops::sum(ops::maxpool_time(x)));
  EXPECT_EQ(x.grad()[0], 1);
  EXPECT_EQ(x.grad()[1], 0);
  EXPECT_EQ(x.grad()[2], 0);
}

TEST(Concat, ShapesAndErrors) {
  auto x = mat(2, 3, {1, 2, 3, 4, 5, 6});
  auto same = ops::concat<double>({x}, 1);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(same[i], x[i]);
  auto c = ops::concat<double>({x, mat(2, 2, {7, 8, 9, 10})}, 1);
  EXPECT_EQ(c.shape(), (Shape{2, 5}));
  EXPECT_EQ(c.at(0, 3), 7);
  EXPECT_EQ(c.at(1, 0), 4);
  EXPECT_THROW(ops::concat<double>({x, mat(3, 2, {0, 0, 0, 0, 0, 0})}, 1), DimensionError);
}

TEST(L2NormDiff, ExamplesAndZeroDistanceGradient) {
  EXPECT_EQ(ops::l2_norm_diff(Td::from({2}, {3, 4}), Td::zeros({2})).item(), 5.0);
  auto a = Td::from({3}, {1, 2, 3}, true);
  auto b = Td::from({3}, {1, 2, 3}, true);
  auto d = ops::l2_norm_diff(a, b);
  EXPECT_EQ(d.item(), 0.0);
  backward(d);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.grad()[i], 0.0);
    EXPECT_EQ(b.grad()[i], 0.0);
  }
  Rng rng(6);
  auto p = random_tensor(rng, {11}, -2, 2, false), q = random_tensor(rng, {11}, -2, 2, false);
  double s = 0;
  for (std::size_t i = 0; i < 11; ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
  EXPECT_NEAR(ops::l2_norm_diff(p, q).item(), std::sqrt(s), 1e-6);
  EXPECT_THROW(ops::l2_norm_diff(Td::zeros({2}), Td::zeros({3})), DimensionError);
}

TEST(Backward, LinearAndQuadratic) {
  Rng rng(7);
  auto x = random_tensor(rng, {4, 2});
  backward(ops::sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  auto y = random_tensor(rng, {5});
  backward(ops::sum(ops::mul(y, y)));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(y.grad()[i], 2 * y[i]);
}

TEST(Backward, ErrorsAndSecondCall) {
  auto x = Td::from({2}, {1, 2}, true);
  EXPECT_THROW(backward(ops::scale(x, 2.0)), RankError);
  auto loss = ops::sum(ops::mul(x, x));
  backward(loss);
  EXPECT_THROW(backward(loss), GraphError);
  EXPECT_THROW(backward(ops::sum(Td::from({2}, {1, 2}))), GraphError);
}

TEST(Backward, CompositeMatchesFiniteDifferencesAtStep1e3) {
  Rng rng(8);
  auto a = random_tensor(rng, {3, 4});
  auto b = random_tensor(rng, {4, 2});
  auto bias = random_tensor(rng, {2});
  auto f = [&] {
    auto h = ops::tanh(ops::add_bias_rows(ops::matmul(a, b), bias));
    auto s = ops::softmax_rows(h);
    return ops::sum(ops::mul(s, ops::sigmoid(h)));
  };
  EXPECT_LT(max_grad_error({a, b, bias}, f, 1e-3), 1e-4);
}

TEST(Backward, NoGradRecordsNothing) {
  auto x = Td::from({2}, {1, 2}, true);
  NoGradGuard ng;
  auto y = ops::mul(x, x);
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

// Every op against central differences on inputs in [-2, 2].
TEST(OpGradients, EveryOperation) {
  Rng rng(10);
  auto a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 5}), c = random_tensor(rng, {3, 4});
  auto w = random_tensor(rng, {5, 4}), bias = random_tensor(rng, {4});
  auto weights = random_tensor(rng, {3, 4}, -1, 1, false);
  const double tol = 1e-6;
  auto wsum = [&](const Td& t) { return ops::sum(ops::mul(t, weights)); };

  EXPECT_LT(max_grad_error({a, b}, [&] { return ops::sum(ops::tanh(ops::matmul(a, b))); }), tol);
  EXPECT_LT(max_grad_error({a, w}, [&] { return ops::sum(ops::tanh(ops::matmul_nt(a, w))); }), tol);
  EXPECT_LT(max_grad_error({a, c}, [&] { return wsum(ops::add(a, c)); }), tol);
  EXPECT_LT(max_grad_error({a, c}, [&] { return wsum(ops::sub(a, c)); }), tol);
  EXPECT_LT(max_grad_error({a, c}, [&] { return wsum(ops::mul(a, c)); }), tol);
  EXPECT_LT(max_grad_error({a}, [&] { return wsum(ops::scale(a, -1.7)); }), tol);
  EXPECT_LT(max_grad_error({a}, [&] { return wsum(ops::tanh(a)); }), tol);
  EXPECT_LT(max_grad_error({a}, [&] { return wsum(ops::sigmoid(a)); }), tol);
  EXPECT_LT(max_grad_error({a, bias}, [&] { return wsum(ops::add_bias_rows(a, bias)); }), tol);
  EXPECT_LT(max_grad_error({a}, [&] { return wsum(ops::softmax_rows(a)); }), tol);
  EXPECT_LT(max_grad_error({a, c}, [&] { return ops::sum(ops::tanh(ops::concat<double>({a, c}, 1))); }), tol);
  EXPECT_LT(max_grad_error({a, c}, [&] { return ops::sum(ops::tanh(ops::concat<double>({a, c}, 0))); }), tol);
  EXPECT_LT(max_grad_error({a}, [&] { return ops::sum(ops::tanh(ops::reshape(a, {2, 6}))); }), tol);
  EXPECT_LT(max_grad_error({a, c}, [&] { return ops::l2_norm_diff(a, c); }), tol);

  // relu and maxpool away from their kinks
  auto r = Td::from({4}, {-1.5, -0.4, 0.6, 1.9}, true);
  EXPECT_LT(max_grad_error({r}, [&] { return ops::sum(ops::mul(ops::relu(r), r)); }), tol);
  auto m = Td::from({3, 2}, {0.1, 1.5, 0.9, -0.3, 0.4, 0.7}, true);
  EXPECT_LT(max_grad_error({m}, [&] { return ops::sum(ops::tanh(ops::maxpool_time(m))); }), tol);

  auto table = random_tensor(rng, {6, 3});
  const std::vector<std::int32_t> ids{2, 0, 2, 5};
  EXPECT_LT(max_grad_error({table}, [&] { return ops::sum(ops::tanh(ops::gather_rows<double>(table, ids))); }), tol);
}

TEST(Determinism, SameInputsSameBits) {
  Rng rng(11);
  auto a = random_tensor<float>(rng, {7, 9}, -2, 2, false), b = random_tensor<float>(rng, {9, 5}, -2, 2, false);
  auto x = ops::softmax_rows(ops::matmul(a, b));
  auto y = ops::softmax_rows(ops::matmul(a, b));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x[i], y[i]);
}

// Scalar reference LSTM, gate order (i, f, g, o).
std::vector<double> reference_lstm(const Td& x, const Td& wi, const Td& wh, const Td& b, bool reverse) {
  const std::size_t T = x.dim(0), in = x.dim(1), h = wh.dim(0);
  std::vector<double> out(T * h), hs(h, 0.0), cs(h, 0.0);
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    std::vector<double> z(4 * h);
    for (std::size_t j = 0; j < 4 * h; ++j) {
      double acc = b[j];
      for (std::size_t k = 0; k < in; ++k) acc += x.at(t, k) * wi.at(k, j);
      for (std::size_t k = 0; k < h; ++k) acc += hs[k] * wh.at(k, j);
      z[j] = acc;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sig(z[j]), fg = sig(z[h + j]), gg = std::tanh(z[2 * h + j]), og = sig(z[3 * h + j]);
      cs[j] = fg * cs[j] + ig * gg;
      hs[j] = og * std::tanh(cs[j]);
      out[t * h + j] = hs[j];
    }
  }
  return out;
}

TEST(Lstm, MatchesScalarReferenceBothDirections) {
  Rng rng(12);
  auto x = random_tensor(rng, {5, 3}, -2, 2, false);
  auto wi = random_tensor(rng, {3, 8}, -1, 1, false), wh = random_tensor(rng, {2, 8}, -1, 1, false);
  auto b = random_tensor(rng, {8}, -1, 1, false);
  for (bool rev : {false, true}) {
    auto got = ops::lstm(x, wi, wh, b, rev);
    auto want = reference_lstm(x, wi, wh, b, rev);
    ASSERT_EQ(got.shape(), (Shape{5, 2}));
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12);
      EXPECT_LT(std::abs(got[i]), 1.0);
    }
  }
  EXPECT_THROW(ops::lstm(Td::zeros({0, 3}), wi, wh, b, false), EmptySequenceError);
  EXPECT_THROW(ops::lstm(Td::zeros({2, 4}), wi, wh, b, false), DimensionError);
}

TEST(Lstm, BatchedEqualsPerSequence) {
  Rng rng(13);
  auto x = random_tensor(rng, {2, 4, 3}, -2, 2, false);
  auto wi = random_tensor(rng, {3, 8}, -1, 1, false), wh = random_tensor(rng, {2, 8}, -1, 1, false);
  auto b = random_tensor(rng, {8}, -1, 1, false);
  auto batched = ops::lstm(x, wi, wh, b, true);
  for (std::size_t n = 0; n < 2; ++n) {
    std::vector<double> v(x.values().begin() + n * 12, x.values().begin() + (n + 1) * 12);
    auto single = ops::lstm(Td::from({4, 3}, v), wi, wh, b, true);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(batched[n * 8 + i], single[i]);
  }
}

TEST(Lstm, GradientsMatchFiniteDifferences) {
  Rng rng(14);
  auto x = random_tensor(rng, {3, 3});
  auto wi = random_tensor(rng, {3, 8}, -1, 1), wh = random_tensor(rng, {2, 8}, -1, 1);
  auto b = random_tensor(rng, {8}, -1, 1);
  auto weights = random_tensor(rng, {3, 2}, -1, 1, false);
  for (bool rev : {false, true}) {
    auto f = [&] { return ops::sum(ops::mul(ops::lstm(x, wi, wh, b, rev), weights)); };
    // h=1e-6 is already roundoff-dominated for this composite.
    EXPECT_LT(max_grad_error({x, wi, wh, b}, f, 1e-5), 1e-6);
  }
}

}  // namespace
}  // namespace mtvqa
