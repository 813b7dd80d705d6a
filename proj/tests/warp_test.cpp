#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "advpatch/gradcheck.hpp"
#include "advpatch/ops.hpp"
#include "advpatch/warp.hpp"
#include "test_support.hpp"

using namespace advpatch;
using advpatch::testing::random_tensor;

namespace {

// Scalar-loop inverse mapping: rotate each output pixel center back by the
// rotation, shrink to canvas units, sample bilinearly, zero outside.
double oracle_sample(const Tensor& canvas, std::size_t ch, double u, double v) {
  const auto p = static_cast<long>(canvas.dim(canvas.rank() - 1));
  auto at = [&](long r, long c) {
    if (r < 0 || c < 0 || r >= p || c >= p) return 0.0;
    return canvas[(ch * p + r) * p + c];
  };
  const long c0 = static_cast<long>(std::floor(u)), r0 = static_cast<long>(std::floor(v));
  const double fu = u - c0, fv = v - r0;
  return (1 - fv) * ((1 - fu) * at(r0, c0) + fu * at(r0, c0 + 1)) + fv * ((1 - fu) * at(r0 + 1, c0) + fu * at(r0 + 1, c0 + 1));
}

Tensor oracle_warp(const Tensor& canvas, const AffineTransform& t, std::size_t h, std::size_t w) {
  const std::size_t p = canvas.dim(canvas.rank() - 1);
  const std::size_t channels = canvas.rank() == 3 ? canvas.dim(0) : 1;
  const double side = std::round(std::sqrt(t.scale) * static_cast<double>(std::min(h, w)));
  const double k = static_cast<double>(p) / side;
  Values out(static_cast<Eigen::Index>(channels * h * w));
  for (std::size_t ch = 0; ch < channels; ++ch) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double x = static_cast<double>(j) + 0.5 - t.center_x, y = static_cast<double>(i) + 0.5 - t.center_y;
        const double u = (std::cos(-t.rotation) * x - std::sin(-t.rotation) * y) * k + p / 2.0 - 0.5;
        const double v = (std::sin(-t.rotation) * x + std::cos(-t.rotation) * y) * k + p / 2.0 - 0.5;
        out[static_cast<Eigen::Index>((ch * h + i) * w + j)] = oracle_sample(canvas, ch, u, v);
      }
    }
  }
  return Tensor(canvas.rank() == 3 ? Shape{channels, h, w} : Shape{h, w}, out);
}

double max_abs_diff(const Tensor& a, const Tensor& b) { return (a.values() - b.values()).abs().maxCoeff(); }

}  // namespace

TEST(Transform, FootprintSide) {
  EXPECT_EQ(footprint_side(0.25, 32, 32), 16u);
  EXPECT_EQ(footprint_side(1.0, 32, 32), 32u);
  EXPECT_EQ(footprint_side(0.3, 32, 32), 18u);
  EXPECT_THROW(footprint_side(0.0, 32, 32), ConfigError);
  EXPECT_THROW(footprint_side(1.5, 32, 32), ConfigError);
  EXPECT_THROW(footprint_side(1e-6, 32, 32), ConfigError);
}

TEST(Transform, PointDistributionGivesThatTransform) {
  Rng rng(1);
  // Side 16 on a 16x16 image leaves exactly one center.
  const TransformDistribution dist{0, 0, 0.25, 0.25};
  const AffineTransform t = sample_transform(dist, 32, 32, rng);
  EXPECT_EQ(t.rotation, 0.0);
  EXPECT_EQ(t.scale, 0.25);
  const AffineTransform whole = sample_transform({0, 0, 1.0, 1.0}, 32, 32, rng);
  EXPECT_EQ(whole, (AffineTransform{0.0, 1.0, 16.0, 16.0}));
}

TEST(Transform, RotationMeanWithinThreeStandardErrors) {
  Rng rng(2024);
  const TransformDistribution dist;
  const std::size_t n = 10000;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) total += sample_transform(dist, 32, 32, rng).rotation;
  const double width = dist.rotation_max - dist.rotation_min;
  const double se = width / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
  EXPECT_LT(std::abs(total / n), 3 * se);
}

TEST(Transform, SamplesKeepFootprintInside) {
  Rng rng(5);
  const TransformDistribution dist;
  for (int i = 0; i < 2000; ++i) {
    const AffineTransform t = sample_transform(dist, 32, 32, rng);
    ASSERT_GE(t.rotation, dist.rotation_min);
    ASSERT_LE(t.rotation, dist.rotation_max);
    ASSERT_GE(t.scale, dist.scale_min);
    ASSERT_LE(t.scale, dist.scale_max);
    const double half = footprint_half_extent(footprint_side(t.scale, 32, 32), t.rotation);
    ASSERT_GE(t.center_x - half, 0.0);
    ASSERT_LE(t.center_x + half, 32.0);
    ASSERT_GE(t.center_y - half, 0.0);
    ASSERT_LE(t.center_y + half, 32.0);
  }
}

TEST(Transform, InfeasibleScaleRejected) {
  Rng rng(1);
  EXPECT_THROW(sample_transform({-0.3, 0.3, 1.0, 1.0}, 32, 32, rng), ConfigError);
  EXPECT_THROW(check_feasible({0.3, -0.3, 0.1, 0.2}, 32, 32), ConfigError);
  EXPECT_NO_THROW(check_feasible({}, 32, 32));
}

TEST(Warp, IdentityPlacementCopiesCanvas) {
  const Tensor canvas = random_tensor({3, 4, 4}, 1);
  // Side 4 on an 8x8 image, footprint rows/cols 2..5.
  const Tensor out = warp_bilinear(canvas, AffineTransform{0.0, 0.25, 4.0, 4.0}, 8, 8);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        const bool inside = i >= 2 && i < 6 && j >= 2 && j < 6;
        const double expected = inside ? canvas[(ch * 4 + i - 2) * 4 + j - 2] : 0.0;
        EXPECT_EQ(out[(ch * 8 + i) * 8 + j], expected);
      }
    }
  }
}

TEST(Warp, MidpointOfFourPixels) {
  const Tensor canvas({2, 2}, (Values(4) << 0, 1, 0, 1).finished());
  // Centering the footprint on a pixel center makes that pixel sample the
  // canvas midpoint.
  const Tensor out = warp_bilinear(canvas, AffineTransform{0.0, 1.0 / 4.0, 2.5, 2.5}, 4, 4);
  EXPECT_EQ(out[2 * 4 + 2], 0.5);
}

TEST(Warp, QuarterTurnOfAsymmetricCanvas) {
  const Tensor canvas({2, 2}, (Values(4) << 1, 2, 3, 4).finished());
  const double quarter = std::numbers::pi / 2;
  const AffineTransform t{quarter, 1.0 / 4.0, 2.0, 2.0};
  const Tensor out = warp_bilinear(canvas, t, 4, 4);
  EXPECT_LT(max_abs_diff(out, oracle_warp(canvas, t, 4, 4)), 1e-12);
  // With y pointing down, a positive angle turns [[1 2] [3 4]] clockwise on screen.
  EXPECT_NEAR(out[1 * 4 + 1], 3.0, 1e-12);
  EXPECT_NEAR(out[1 * 4 + 2], 1.0, 1e-12);
  EXPECT_NEAR(out[2 * 4 + 1], 4.0, 1e-12);
  EXPECT_NEAR(out[2 * 4 + 2], 2.0, 1e-12);
}

TEST(Warp, MatchesScalarOracleOnSeededCases) {
  Rng rng(77);
  for (int i = 0; i < 20; ++i) {
    const std::size_t p = 3 + uniform_index(rng, 14);
    const TransformDistribution dist{-std::numbers::pi, std::numbers::pi, 0.02, 0.4};
    const AffineTransform t = sample_transform(dist, 32, 32, rng);
    const Tensor canvas = random_tensor({3, p, p}, 100 + i);
    EXPECT_LT(max_abs_diff(warp_bilinear(canvas, t, 32, 32), oracle_warp(canvas, t, 32, 32)), 1e-12) << i;
  }
}

TEST(Warp, ZeroScaleRejected) {
  EXPECT_THROW(warp_bilinear(Tensor::zeros({4, 4}), AffineTransform{0.0, 0.0, 4, 4}, 8, 8), ConfigError);
  EXPECT_THROW(warp_bilinear(Tensor::zeros({4, 5}), AffineTransform{0.0, 0.5, 4, 4}, 8, 8), ShapeError);
}

TEST(Warp, GradientMatchesFiniteDifferences) {
  const Tensor weights = random_tensor({3, 10, 10}, 4, 0.5, 1.5);
  const double err = finite_diff_check(
      [&](const Tensor& c) { return sum(mul(warp_bilinear(c, AffineTransform{0.3, 0.3, 5.2, 4.9}, 10, 10), weights)); },
      random_tensor({3, 5, 5}, 3));
  EXPECT_LT(err, 1e-5);
}
