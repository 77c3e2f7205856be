#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "coacor/core/tensor.hpp"
#include "support/grad_check.hpp"

using namespace coacor;
using ad::Tensor;
using coacor::testing::check_gradients;
using coacor::testing::random_matrix;
using coacor::testing::random_vector;

namespace {

constexpr double kGradTol = 1e-4;

}  // namespace

TEST(Tensor, RejectsMismatchedShape) {
  EXPECT_THROW(Tensor({2, 3}, {1, 2, 3}), Error);
  EXPECT_THROW(Tensor::zeros({0, 2}), Error);
}

TEST(Tensor, MatmulKnownValues) {
  auto a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  auto b = Tensor::matrix(2, 2, {5, 6, 7, 8});
  auto c = ad::matmul(a, b);
  EXPECT_EQ(c.shape(), (ad::Shape{2, 2}));
  EXPECT_DOUBLE_EQ(c.at(0, 0), 19);
  EXPECT_DOUBLE_EQ(c.at(0, 1), 22);
  EXPECT_DOUBLE_EQ(c.at(1, 0), 43);
  EXPECT_DOUBLE_EQ(c.at(1, 1), 50);
}

TEST(Tensor, MatmulDimensionError) {
  auto a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  try {
    ad::matmul(a, a);
    FAIL() << "expected dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST(Tensor, SoftmaxKnownValues) {
  auto p = ad::softmax(Tensor::vector({1, 2, 3}));
  EXPECT_NEAR(p[0], 0.09003057, 1e-8);
  EXPECT_NEAR(p[1], 0.24472847, 1e-8);
  EXPECT_NEAR(p[2], 0.66524096, 1e-8);
}

TEST(Tensor, SoftmaxIsShiftInvariantAndStable) {
  auto p = ad::softmax(Tensor::vector({1000, 1001, 1002}));
  auto q = ad::softmax(Tensor::vector({1, 2, 3}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  double s = 0;
  for (double v : p.values()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Tensor, LogSoftmaxMaskGivesMinusInfinity) {
  auto lp = ad::log_softmax(Tensor::vector({0.3, 1.0, -2.0, 0.5}), {0, 1, 0, 0});
  EXPECT_TRUE(std::isinf(lp[1]) && lp[1] < 0);
  double s = 0;
  for (std::size_t i : {0u, 2u, 3u}) s += std::exp(lp[i]);
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Tensor, SigmoidSaturatesWithoutOverflow) {
  auto s = ad::sigmoid(Tensor::vector({-1000, 0, 1000}));
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 0.5);
  EXPECT_EQ(s[2], 1.0);
}

TEST(Tensor, CosineKnownValue) {
  auto c = ad::cosine(Tensor::vector({1, 2}), Tensor::vector({2, 1}));
  EXPECT_NEAR(c.item(), 0.8, 1e-15);
}

TEST(Tensor, CosineZeroVectorIsDegenerate) {
  const auto before = ad::degenerate_cosine_count();
  bool degenerate = false;
  auto c = ad::cosine(Tensor::vector({0, 0}), Tensor::vector({2, 1}), &degenerate);
  EXPECT_EQ(c.item(), 0.0);
  EXPECT_TRUE(degenerate);
  EXPECT_EQ(ad::degenerate_cosine_count(), before + 1);
}

TEST(Tensor, CosineStaysInRange) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    auto a = random_vector(5, rng);
    auto c = ad::cosine(a, ad::scale(a, 3.0));
    EXPECT_LE(c.item(), 1.0);
    EXPECT_GE(c.item(), -1.0);
  }
}

TEST(Tensor, MaxOverTimePicksFirstMaximum) {
  auto h = Tensor::matrix(3, 2, {1, 5, 4, 5, 4, 0}, true);
  ad::Tape tape;
  auto m = ad::max_over_time(h);
  EXPECT_DOUBLE_EQ(m[0], 4);
  EXPECT_DOUBLE_EQ(m[1], 5);
  tape.backward(ad::sum(m));
  std::vector<double> g(h.grad().begin(), h.grad().end());
  EXPECT_EQ(g, (std::vector<double>{0, 1, 1, 0, 0, 0}));
}

TEST(Tape, NonScalarLossRejected) {
  auto a = Tensor::vector({1, 2}, true);
  ad::Tape tape;
  auto b = ad::scale(a, 2.0);
  EXPECT_THROW(tape.backward(b), Error);
}

TEST(Tape, NoGradSuspendsRecording) {
  auto a = Tensor::vector({1, 2}, true);
  ad::Tape tape;
  {
    ad::NoGrad ng;
    auto b = ad::sum(ad::square(a));
    EXPECT_FALSE(b.requires_grad());
  }
  EXPECT_EQ(tape.size(), 0u);
  auto c = ad::sum(ad::square(a));
  EXPECT_TRUE(c.requires_grad());
  EXPECT_GT(tape.size(), 0u);
}

TEST(Tape, LeafGradientsAccumulateAcrossUses) {
  auto a = Tensor::vector({3}, true);
  ad::Tape tape;
  auto y = ad::sum(ad::add(ad::mul(a, a), a));  // a^2 + a
  tape.backward(y);
  EXPECT_DOUBLE_EQ(a.grad()[0], 7.0);
}

TEST(Tape, ReusedSubexpressionGradient) {
  auto a = Tensor::vector({0.7, -0.2}, true);
  auto f = [&] {
    auto t = ad::tanh(a);
    return ad::sum(ad::mul(t, t));
  };
  auto r = check_gradients({{"a", a}}, f);
  EXPECT_LT(r.max_rel_err, kGradTol) << r.worst;
}

// Each op's backward against central differences.
TEST(TensorGradients, LinearAlgebraOps) {
  Rng rng(11);
  auto A = random_matrix(3, 4, rng, true);
  auto B = random_matrix(4, 2, rng, true);
  auto x = random_vector(4, rng, true);
  auto w = random_vector(3, rng, true);
  auto r = check_gradients({{"A", A}, {"B", B}, {"x", x}, {"w", w}}, [&] {
    auto m = ad::sum(ad::square(ad::matmul(A, B)));
    auto v = ad::dot(ad::matvec(A, x), w);
    auto t = ad::sum(ad::tanh(ad::matvec_transposed(A, w)));
    return ad::add(ad::add(m, v), t);
  });
  EXPECT_LT(r.max_rel_err, kGradTol) << r.worst;
}

TEST(TensorGradients, PointwiseOps) {
  Rng rng(12);
  auto a = random_vector(6, rng, true);
  auto b = random_vector(6, rng, true);
  auto r = check_gradients({{"a", a}, {"b", b}}, [&] {
    auto s = ad::sigmoid(ad::mul(a, b));
    auto t = ad::tanh(ad::sub(a, b));
    auto u = ad::relu(ad::add_constant(a, 0.123));
    auto e = ad::elementwise(ad::Elementwise::kMul, s, t);
    return ad::add(ad::mean(ad::add(e, ad::scale(u, 0.5))), ad::sum(ad::square(b)));
  });
  EXPECT_LT(r.max_rel_err, kGradTol) << r.worst;
}

TEST(TensorGradients, StructuralOps) {
  Rng rng(13);
  auto table = random_matrix(5, 3, rng, true);
  auto a = random_vector(3, rng, true);
  auto bias = random_vector(3, rng, true);
  auto r = check_gradients({{"table", table}, {"a", a}, {"bias", bias}}, [&] {
    auto e1 = ad::embedding(table, 1);
    auto e3 = ad::embedding(table, 3);
    auto st = ad::stack({e1, a, e3});
    auto biased = ad::add_bias(st, bias);
    auto pooled = ad::max_over_time(biased);
    auto cat = ad::concat({pooled, ad::slice(a, 1, 2)});
    auto masked = ad::apply_mask(cat, {2.0, 0.0, 1.0, 1.0, 2.0});
    return ad::sum_all({ad::sum(masked), ad::pick(ad::tanh(e3), 2)});
  });
  EXPECT_LT(r.max_rel_err, kGradTol) << r.worst;
}

TEST(TensorGradients, SoftmaxFamilyAndCosine) {
  Rng rng(14);
  auto z = random_vector(5, rng, true);
  auto y = random_vector(5, rng, true);
  auto r = check_gradients({{"z", z}, {"y", y}}, [&] {
    auto p = ad::softmax(z);
    auto lp = ad::log_softmax(y, {0, 0, 1, 0, 0});
    auto c = ad::cosine(z, y);
    return ad::add(ad::add(ad::dot(p, y), ad::pick(lp, 4)), c);
  });
  EXPECT_LT(r.max_rel_err, kGradTol) << r.worst;
}
