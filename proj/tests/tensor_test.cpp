#include <gtest/gtest.h>

#include <cmath>

#include "advpatch/gradcheck.hpp"
#include "advpatch/ops.hpp"
#include "advpatch/rng.hpp"

using namespace advpatch;

namespace {

Tensor vec(std::initializer_list<double> v) {
  Values values(static_cast<Eigen::Index>(v.size()));
  std::size_t i = 0;
  for (double x : v) values[static_cast<Eigen::Index>(i++)] = x;
  return Tensor({v.size()}, values);
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  Rng rng(seed);
  Values v(static_cast<Eigen::Index>(numel(shape)));
  for (auto& x : v) x = uniform(rng, lo, hi);
  return Tensor(std::move(shape), v);
}

}  // namespace

TEST(Tensor, DefaultIsScalarZero) {
  Tensor t;
  EXPECT_EQ(t.rank(), 0u);
  EXPECT_EQ(t.item(), 0.0);
  EXPECT_FALSE(t.tracked());
}

TEST(Tensor, RejectsMismatchedValueCount) {
  EXPECT_THROW(Tensor({2, 3}, Values::Zero(5)), ShapeError);
}

TEST(Ops, LogSoftmaxOfUniformLogits) {
  const Tensor out = log_softmax(Tensor::zeros({1, 4}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], std::log(0.25), 1e-15);
  EXPECT_NEAR(out[0], -1.3862944, 1e-7);
}

TEST(Ops, LogSoftmaxRowsNormalise) {
  const Tensor out = log_softmax(random_tensor({6, 10}, 3, -30, 30));
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0;
    for (std::size_t k = 0; k < 10; ++k) total += std::exp(out[r * 10 + k]);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Ops, ReluForwardAndBackward) {
  Tape tape;
  const Tensor x = tape.variable(vec({-1, 0, 2}));
  const Tensor y = relu(x);
  EXPECT_TRUE(y.identical(vec({0, 0, 2})));
  const Tensor g = tape.backward(sum(y)).wrt(x);
  EXPECT_TRUE(g.identical(vec({0, 0, 1})));
}

TEST(Ops, ConvCountsOnes) {
  const Tensor out = conv2d(Tensor::full({1, 1, 3, 3}, 1.0), Tensor::full({1, 1, 2, 2}, 1.0), 1, 0);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_TRUE(out.identical(Tensor::full({1, 1, 2, 2}, 4.0)));
}

TEST(Ops, ConvPaddingAndStride) {
  // 1x1x3x3 ramp, 3x3 ones kernel, pad 1, stride 2: corner sums of the padded image.
  Values v(9);
  for (int i = 0; i < 9; ++i) v[i] = i + 1;
  const Tensor out = conv2d(Tensor({1, 1, 3, 3}, v), Tensor::full({1, 1, 3, 3}, 1.0), 2, 1);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(out[0], 1 + 2 + 4 + 5);
  EXPECT_EQ(out[1], 2 + 3 + 5 + 6);
  EXPECT_EQ(out[2], 4 + 5 + 7 + 8);
  EXPECT_EQ(out[3], 5 + 6 + 8 + 9);
}

TEST(Ops, ConvShapeMismatchNamesOpAndShapes) {
  try {
    conv2d(Tensor::zeros({1, 2, 5, 5}), Tensor::zeros({1, 3, 3, 3}), 1, 0);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("conv2d"), std::string::npos);
    EXPECT_NE(what.find("[1x2x5x5]"), std::string::npos) << what;
    EXPECT_NE(what.find("[1x3x3x3]"), std::string::npos) << what;
  }
}

TEST(Ops, AddBroadcastsOnlyOverLeadingAxis) {
  const Tensor a = Tensor::full({2, 3}, 1.0);
  EXPECT_TRUE(add(a, vec({1, 2, 3})).identical(Tensor({2, 3}, (Values(6) << 2, 3, 4, 2, 3, 4).finished())));
  EXPECT_THROW(add(a, vec({1, 2})), ShapeError);
  EXPECT_THROW(add(a, Tensor::zeros({3, 2})), ShapeError);
  EXPECT_THROW(mul(Tensor::zeros({2, 3, 4}), Tensor::zeros({4})), ShapeError);
}

TEST(Ops, MatmulShapes) {
  const Tensor out = matmul(Tensor::full({2, 3}, 1.0), Tensor::full({3, 4}, 2.0));
  EXPECT_EQ(out.shape(), (Shape{2, 4}));
  EXPECT_TRUE(out.identical(Tensor::full({2, 4}, 6.0)));
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(Ops, NonFiniteInputRaises) {
  Values v(3);
  v << 1.0, std::nan(""), 0.0;
  EXPECT_THROW(relu(Tensor({3}, v)), NumericsError);
  v[1] = INFINITY;
  EXPECT_THROW(sigmoid(Tensor({3}, v)), NumericsError);
}

TEST(Ops, SigmoidIsStableAtExtremes) {
  const Tensor out = sigmoid(vec({-800, 0, 800}));
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], 0.5);
  EXPECT_EQ(out[2], 1.0);
}

TEST(Ops, MaxpoolTiesGoToFirstInScanOrder) {
  Tape tape;
  const Tensor x = tape.variable(Tensor::full({1, 1, 2, 2}, 3.0));
  const Tensor y = maxpool2d(x, 2, 2);
  EXPECT_EQ(y.item(), 3.0);
  const Tensor g = tape.backward(sum(y)).wrt(x);
  EXPECT_TRUE(g.identical(Tensor({1, 1, 2, 2}, (Values(4) << 1, 0, 0, 0).finished())));
}

TEST(Ops, MaxpoolRoutesEachUpstreamEntryOnce) {
  Tape tape;
  const Tensor x = tape.variable(random_tensor({2, 3, 6, 6}, 11));
  const Tensor y = maxpool2d(x, 2, 2);
  const Tensor up = random_tensor(y.shape(), 12);
  const Tensor g = tape.backward(sum(mul(y, up))).wrt(x);
  EXPECT_NEAR(g.values().abs().sum(), up.values().abs().sum(), 1e-12);
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < g.size(); ++i) nonzero += g[i] != 0.0;
  EXPECT_EQ(nonzero, y.size());
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  const Tensor x = tape.variable(random_tensor({2, 3, 4}, 1));
  EXPECT_TRUE(tape.backward(sum(x)).wrt(x).identical(Tensor::full({2, 3, 4}, 1.0)));
}

TEST(Backward, QuadraticGradient) {
  Tape tape;
  const Tensor x = tape.variable(vec({1, 2, 3}));
  EXPECT_TRUE(tape.backward(sum(mul(x, x))).wrt(x).identical(vec({2, 4, 6})));
}

TEST(Backward, SharedInputsAccumulate) {
  Tape tape;
  const Tensor x = tape.variable(vec({1, -2}));
  const Tensor loss = sum(add(scale(x, 3.0), x));
  EXPECT_TRUE(tape.backward(loss).wrt(x).identical(vec({4, 4})));
}

TEST(Backward, RecordIsConsumedOnce) {
  Tape tape;
  const Tensor x = tape.variable(vec({1, 2}));
  const Tensor loss = sum(x);
  tape.backward(loss);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(loss), StateError);
}

TEST(Backward, NonScalarLossRejected) {
  Tape tape;
  const Tensor x = tape.variable(vec({1, 2}));
  EXPECT_THROW(tape.backward(mul(x, x)), ShapeError);
}

TEST(Backward, LossFromAnotherRecordRejected) {
  Tape a, b;
  const Tensor x = a.variable(vec({1, 2}));
  EXPECT_THROW(b.backward(sum(x)), StateError);
  const Tensor y = b.variable(vec({1, 2}));
  EXPECT_THROW(add(x, y), StateError);
}

TEST(Backward, UnrelatedLeafGetsZeros) {
  Tape tape;
  const Tensor x = tape.variable(vec({1, 2}));
  const Tensor unused = tape.variable(vec({5, 6, 7}));
  const Gradient g = tape.backward(sum(x));
  EXPECT_TRUE(g.wrt(unused).identical(Tensor::zeros({3})));
}

TEST(Backward, ForwardIsDeterministic) {
  const Tensor x = random_tensor({2, 2, 6, 6}, 5);
  const Tensor k = random_tensor({3, 2, 3, 3}, 6);
  EXPECT_TRUE(conv2d(x, k, 1, 1).identical(conv2d(x, k, 1, 1)));
}

TEST(FiniteDiff, ExactForQuadratics) {
  const double err = finite_diff_check([](const Tensor& x) { return sum(mul(x, x)); }, Tensor::scalar(3.0), 1e-6);
  EXPECT_LT(err, 1e-8);
}

TEST(FiniteDiff, LogSoftmaxComponent) {
  const double err = finite_diff_check(
      [](const Tensor& x) { return pick(log_softmax(reshape(x, {1, 5})), 2); }, random_tensor({5}, 21));
  EXPECT_LT(err, 1e-5);
}

TEST(FiniteDiff, ConstantFunctionHasZeroError) {
  const double err = finite_diff_check([](const Tensor&) { return Tensor::scalar(4.0); }, random_tensor({4}, 2));
  EXPECT_EQ(err, 0.0);
}

TEST(FiniteDiff, RejectsNonPositiveStepAndNonFiniteValues) {
  auto f = [](const Tensor& x) { return sum(x); };
  EXPECT_THROW(finite_diff_check(f, vec({1}), 0.0), ConfigError);
  auto blowup = [](const Tensor& x) { return sum(log_softmax(reshape(scale(x, 1e308), {1, 2}))); };
  EXPECT_THROW(finite_diff_check(blowup, vec({1e10, 1}), 1e-6), NumericsError);
}

TEST(FiniteDiff, ConvInputGradientOnSeededPoint) {
  const Tensor k = random_tensor({3, 2, 3, 3}, 8, 0.5, 1.5);
  const double err =
      finite_diff_check([&](const Tensor& x) { return sum(conv2d(x, k, 1, 0)); }, random_tensor({1, 2, 5, 5}, 9));
  EXPECT_LT(err, 1e-5);
}

TEST(FiniteDiff, PrimitivesOnThreeSeededPoints) {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    for (const auto& r : gradcheck_suite(seed)) EXPECT_LT(r.max_rel_error, 1e-5) << r.op << " seed " << seed;
  }
}
