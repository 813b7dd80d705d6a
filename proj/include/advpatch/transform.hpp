#pragma once

#include <cstddef>
#include <numbers>

#include "advpatch/rng.hpp"

namespace advpatch {

inline constexpr double kDegree = std::numbers::pi / 180.0;

/// Placement of a patch in an image: rotation (radians), scale (patch area as
/// a fraction of image area), and the footprint center in pixel coordinates
/// (x to the right, y down; pixel (r, c) covers [c, c+1) x [r, r+1)).
struct AffineTransform {
  double rotation = 0.0;
  double scale = 0.25;
  double center_x = 0.0;
  double center_y = 0.0;

  bool operator==(const AffineTransform&) const = default;
};

struct TransformDistribution {
  double rotation_min = -20 * kDegree;
  double rotation_max = 20 * kDegree;
  double scale_min = 0.05;
  double scale_max = 0.3;

  static TransformDistribution fixed_scale(double scale, double rotation_min, double rotation_max) {
    return {rotation_min, rotation_max, scale, scale};
  }
  bool operator==(const TransformDistribution&) const = default;
};

/// Side in pixels of the unrotated patch footprint: round(sqrt(s) * min(H, W)).
std::size_t footprint_side(double scale, std::size_t height, std::size_t width);

/// Half-width of the axis-aligned box around a rotated square of `side` pixels.
double footprint_half_extent(std::size_t side, double rotation);

/// Throws ConfigError unless every transform the distribution can produce
/// keeps its rotated footprint inside a height x width image.
void check_feasible(const TransformDistribution& dist, std::size_t height, std::size_t width);

/// Rotation and scale uniform over their ranges, then a center uniform over
/// the positions that keep the rotated footprint inside the image.
AffineTransform sample_transform(const TransformDistribution& dist, std::size_t height, std::size_t width, Rng& rng);

}  // namespace advpatch
