#include "advpatch/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advpatch/errors.hpp"

namespace advpatch {
namespace {

// max of |cos t| + |sin t| over [lo, hi]
double worst_spread(double lo, double hi) {
  auto spread = [](double t) { return std::abs(std::cos(t)) + std::abs(std::sin(t)); };
  double worst = std::max(spread(lo), spread(hi));
  const double quarter = std::numbers::pi / 2;
  for (double t = std::ceil((lo - quarter / 2) / quarter) * quarter + quarter / 2; t <= hi; t += quarter) {
    worst = std::max(worst, spread(t));
  }
  return worst;
}

}  // namespace

std::size_t footprint_side(double scale, std::size_t height, std::size_t width) {
  if (!(scale > 0.0 && scale <= 1.0)) {
    throw ConfigError("patch scale must lie in (0, 1], got " + std::to_string(scale));
  }
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(scale) * static_cast<double>(std::min(height, width))));
  if (side == 0) throw ConfigError("patch scale " + std::to_string(scale) + " rounds to a zero-pixel footprint");
  return side;
}

double footprint_half_extent(std::size_t side, double rotation) {
  const double spread = std::abs(std::cos(rotation)) + std::abs(std::sin(rotation));
  // An unrotated footprint is exactly side / 2; keep it free of trig rounding.
  return rotation == 0.0 ? static_cast<double>(side) / 2 : static_cast<double>(side) / 2 * spread;
}

void check_feasible(const TransformDistribution& dist, std::size_t height, std::size_t width) {
  if (!(dist.rotation_min <= dist.rotation_max)) throw ConfigError("rotation range is empty");
  if (!(dist.scale_min <= dist.scale_max)) throw ConfigError("scale range is empty");
  footprint_side(dist.scale_min, height, width);
  const std::size_t side = footprint_side(dist.scale_max, height, width);
  const bool no_rotation = dist.rotation_min == 0.0 && dist.rotation_max == 0.0;
  const double half = no_rotation ? static_cast<double>(side) / 2
                                  : static_cast<double>(side) / 2 * worst_spread(dist.rotation_min, dist.rotation_max);
  if (2 * half > static_cast<double>(std::min(height, width))) {
    throw ConfigError("patch footprint at scale " + std::to_string(dist.scale_max) + " does not fit a " +
                      std::to_string(height) + "x" + std::to_string(width) + " image under the rotation range");
  }
}

AffineTransform sample_transform(const TransformDistribution& dist, std::size_t height, std::size_t width, Rng& rng) {
  check_feasible(dist, height, width);
  AffineTransform t;
  t.rotation = dist.rotation_min == dist.rotation_max ? dist.rotation_min : uniform(rng, dist.rotation_min, dist.rotation_max);
  t.scale = dist.scale_min == dist.scale_max ? dist.scale_min : uniform(rng, dist.scale_min, dist.scale_max);
  const double half = footprint_half_extent(footprint_side(t.scale, height, width), t.rotation);
  auto center = [&](std::size_t extent) {
    const double lo = half, hi = static_cast<double>(extent) - half;
    return lo >= hi ? lo : uniform(rng, lo, hi);
  };
  t.center_x = center(width);
  t.center_y = center(height);
  return t;
}

}  // namespace advpatch
