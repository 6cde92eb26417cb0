#include <gtest/gtest.h>

#include <cmath>

#include "groupreg/error.hpp"
#include "groupreg/gradcheck.hpp"
#include "groupreg/ops.hpp"
#include "test_support.hpp"

using namespace groupreg;
using groupreg::testing::conv_oracle;
using groupreg::testing::random_away_from_zero;
using groupreg::testing::random_tensor;

namespace {

Tensor64 empty_bias() { return Tensor64(Shape{0}, {}); }

}  // namespace

TEST(Tensor, DataLengthMustMatchShape) {
    EXPECT_THROW(Tensor64(Shape{2, 3}, std::vector<double>(5)), DimensionError);
}

TEST(Tensor, BackwardTwiceWithoutRetainThrows) {
    auto x = Tensor64(Shape{3}, {1, 2, 3}, true);
    auto y = ops::sum_all(ops::square(x));
    y.backward();
    EXPECT_THROW(y.backward(), std::logic_error);
}

TEST(Tensor, RetainedGraphAccumulates) {
    auto x = Tensor64(Shape{2}, {1, 2}, true);
    auto y = ops::sum_all(ops::square(x));
    y.backward(true);
    y.backward(true);
    EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], 8.0);
}

TEST(Tensor, SharedSubexpressionVisitedOnce) {
    auto x = Tensor64(Shape{1}, {3.0}, true);
    auto s = ops::square(x);
    auto y = ops::sum_all(ops::add(s, s));  // 2 x^2
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Tensor, UnusedTrackedLeafGetsZeroGradWhenReached) {
    auto x = Tensor64(Shape{2}, {1, 2}, true);
    auto z = Tensor64(Shape{2}, {5, 5}, true);
    auto y = ops::sum_all(ops::add(x, ops::scalar_mul(z, 0.0)));
    y.backward();
    ASSERT_TRUE(z.has_grad());
    EXPECT_EQ(z.grad()[0], 0.0);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
    auto x = Tensor64(Shape{2}, {1, 2}, true);
    NoGradGuard guard;
    auto y = ops::sum_all(x);
    EXPECT_FALSE(y.requires_grad());
}

TEST(Conv2d, OnesKernelCentreIsNine) {
    auto x = Tensor64::full({1, 1, 3, 3}, 1.0);
    auto k = Tensor64::full({1, 1, 3, 3}, 1.0);
    auto y = ops::conv2d(x, k, empty_bias(), 1, 1);
    EXPECT_DOUBLE_EQ(y.data()[4], 9.0);
}

TEST(Conv2d, DeltaKernelIsIdentity) {
    auto x = random_tensor<double>({2, 1, 6, 5}, 11);
    std::vector<double> kv(25, 0.0);
    kv[12] = 1.0;
    auto k = Tensor64({1, 1, 5, 5}, kv);
    auto y = ops::conv2d(x, k, Tensor64({1}, {0.0}), 1, 2);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
    auto x = random_tensor<double>({1, 2, 5, 5}, 1);
    auto k = random_tensor<double>({3, 2, 3, 3}, 2);
    auto b = random_tensor<double>({3}, 3);
    auto y = ops::conv2d(x, k, b, 1, 1);
    const std::vector<double> xv(x.data().begin(), x.data().end());
    const std::vector<double> kv(k.data().begin(), k.data().end());
    const std::vector<double> bv(b.data().begin(), b.data().end());
    const auto expect = conv_oracle(xv, 1, 2, 5, 5, kv, 3, 3, 3, bv, 1, 1);
    ASSERT_EQ(y.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(y.data()[i], expect[i], 1e-12);
}

TEST(Conv2d, StridedMatchesOracle) {
    auto x = random_tensor<double>({2, 3, 8, 8}, 4);
    auto k = random_tensor<double>({4, 3, 3, 3}, 5);
    auto y = ops::conv2d(x, k, empty_bias(), 2, 1);
    EXPECT_EQ(y.shape(), (Shape{2, 4, 4, 4}));
    const auto expect =
        conv_oracle(std::vector<double>(x.data().begin(), x.data().end()), 2, 3, 8, 8,
                    std::vector<double>(k.data().begin(), k.data().end()), 4, 3, 3, {}, 2, 1);
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(y.data()[i], expect[i], 1e-12);
}

TEST(Conv2d, ChannelMismatchNamesAxes) {
    auto x = Tensor64::zeros({1, 2, 4, 4});
    auto k = Tensor64::zeros({1, 3, 3, 3});
    try {
        ops::conv2d(x, k, empty_bias(), 1, 1);
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        EXPECT_NE(std::string(e.what()).find("axis 1"), std::string::npos);
    }
}

TEST(Conv2d, EvenKernelRejected) {
    EXPECT_THROW(ops::conv2d(Tensor64::zeros({1, 1, 4, 4}), Tensor64::zeros({1, 1, 2, 2}),
                             empty_bias(), 1, 0),
                 DimensionError);
}

TEST(LeakyRelu, ForwardAndGradient) {
    auto x = Tensor64({3}, {2.0, -1.0, -3.0}, true);
    auto y = ops::leaky_relu(x, 0.2);
    EXPECT_DOUBLE_EQ(y.data()[0], 2.0);
    EXPECT_DOUBLE_EQ(y.data()[1], -0.2);
    ops::sum_all(y).backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
    EXPECT_DOUBLE_EQ(x.grad()[2], 0.2);
}

TEST(Upsample2x, DuplicatesBlocks) {
    auto x = Tensor64({1, 1, 2, 2}, {1, 2, 3, 4}, true);
    auto y = ops::upsample2x(x);
    const std::vector<double> expect{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(y.data()[i], expect[i]);
    ops::sum_all(y).backward();
    for (double g : x.grad()) EXPECT_EQ(g, 4.0);
}

TEST(Upsample2x, MatchesLoopOracleForwardAndBackward) {
    auto x = random_tensor<double>({2, 3, 3, 4}, 8, -1, 1, true);
    auto w = random_tensor<double>({2, 3, 6, 8}, 9);
    auto y = ops::upsample2x(x);
    ops::sum_all(ops::mul(y, w)).backward();
    for (std::size_t p = 0; p < 6; ++p)
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
                EXPECT_EQ(y.data()[(p * 6 + i) * 8 + j], x.data()[(p * 3 + i / 2) * 4 + j / 2]);
            }
    for (std::size_t p = 0; p < 6; ++p)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                double g = 0;
                for (std::size_t a = 0; a < 2; ++a)
                    for (std::size_t b = 0; b < 2; ++b)
                        g += w.data()[(p * 6 + 2 * i + a) * 8 + 2 * j + b];
                EXPECT_NEAR(x.grad()[(p * 3 + i) * 4 + j], g, 1e-14);
            }
}

TEST(Upsample2x, SumQuadruples) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto x = random_tensor<double>({1, 2, 5, 3}, seed);
        EXPECT_NEAR(ops::sum_all(ops::upsample2x(x)).item(), 4.0 * ops::sum_all(x).item(), 1e-12);
    }
}

TEST(Elementwise, MeanAndConcat) {
    EXPECT_DOUBLE_EQ(ops::mean_all(Tensor64({4}, {1, 2, 3, 4})).item(), 2.5);
    auto a = Tensor64::zeros({2, 1, 3, 3});
    auto b = Tensor64::full({2, 1, 3, 3}, 1.0);
    auto c = ops::concat_channels<double>({a, b});
    EXPECT_EQ(c.shape(), (Shape{2, 2, 3, 3}));
    EXPECT_EQ(c.data()[9], 1.0);
    EXPECT_EQ(c.data()[18], 0.0);
}

TEST(Elementwise, MeanGradientIsOneOverN) {
    auto x = random_tensor<double>({7}, 3, -1, 1, true);
    ops::mean_all(x).backward();
    for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0 / 7.0);
}

TEST(Elementwise, BinaryShapeMismatchThrows) {
    EXPECT_THROW(ops::add(Tensor64::zeros({2}), Tensor64::zeros({3})), DimensionError);
    EXPECT_THROW(ops::mul(Tensor64::zeros({2, 2}), Tensor64::zeros({4})), DimensionError);
}

TEST(GradientCheck, SumHasUnitGradientAndZeroError) {
    auto x = random_tensor<double>({5}, 1);
    auto r = gradient_check<double>([](const Tensor64& t) { return ops::sum_all(t); }, x, 1e-5);
    EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(GradientCheck, MeanOfSquares) {
    auto x = random_tensor<double>({12}, 2);
    auto r = gradient_check<double>(
        [](const Tensor64& t) { return ops::mean_all(ops::square(t)); }, x, 1e-5);
    EXPECT_LT(r.max_rel_error, 1e-6);
    // Analytic value 2x/n.
    auto leaf = Tensor64(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
    ops::mean_all(ops::square(leaf)).backward();
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(leaf.grad()[i], 2.0 * x.data()[i] / 12.0, 1e-15);
}

// Every differentiable op against central differences, ten seeds each.
class OpGradients : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(OpGradients, MatchFiniteDifferences) {
    const std::uint64_t seed = GetParam();
    const double h = 1e-6, tol = 1e-4;
    auto weights = random_tensor<double>({2, 3, 6, 6}, seed + 100);
    auto project = [&](const Tensor64& y) {
        auto w = random_tensor<double>(y.shape(), seed + 200);
        return ops::sum_all(ops::mul(y, w));
    };

    auto x = random_away_from_zero({2, 3, 6, 6}, seed);
    auto positive = random_tensor<double>({2, 3, 6, 6}, seed + 7, 0.5, 2.0);
    auto k = random_tensor<double>({4, 3, 3, 3}, seed + 1);
    auto b = random_tensor<double>({4}, seed + 2);

    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::conv2d(t, k, b, 1, 1)); }, x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::conv2d(x, t, b, 2, 1)); }, k, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::conv2d(x, k, t, 1, 1)); }, b, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::leaky_relu(t, 0.2)); }, x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>([&](const Tensor64& t) { return project(ops::sigmoid(t)); },
                                     x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(
        gradient_check<double>([&](const Tensor64& t) { return project(ops::upsample2x(t)); }, x, h)
            .max_rel_error,
        tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::mul(t, weights)); }, x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::div(weights, t)); }, positive, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::sub(weights, ops::square(t))); }, x,
                  h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::sqrt_eps(t, 1e-5)); }, positive, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::box_sum(t, 3)); }, x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) {
                      return project(ops::concat_channels<double>({t, ops::scalar_mul(t, 2.0)}));
                  },
                  x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) { return project(ops::mean_batch(t)); }, x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) {
                      return project(ops::diff_rows(ops::slice_channels(t, 1, 3)));
                  },
                  x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) {
                      return project(ops::diff_cols(ops::slice_batch(t, 1, 2)));
                  },
                  x, h)
                  .max_rel_error,
              tol);
    EXPECT_LT(gradient_check<double>(
                  [&](const Tensor64& t) {
                      return project(ops::repeat_batch(ops::slice_batch(t, 0, 1), 3));
                  },
                  x, h)
                  .max_rel_error,
              tol);
}

INSTANTIATE_TEST_SUITE_P(TenSeeds, OpGradients, ::testing::Range<std::uint64_t>(0, 10));

TEST(Determinism, RepeatedForwardIsBitIdentical) {
    auto x = random_tensor<float>({3, 4, 16, 16}, 5);
    auto k = random_tensor<float>({8, 4, 3, 3}, 6);
    auto b = random_tensor<float>({8}, 7);
    auto y1 = ops::conv2d(x, k, b, 1, 1);
    auto y2 = ops::conv2d(x, k, b, 1, 1);
    for (std::size_t i = 0; i < y1.size(); ++i) ASSERT_EQ(y1.data()[i], y2.data()[i]);
}
