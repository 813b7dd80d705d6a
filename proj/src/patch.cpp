#include "advpatch/patch.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "advpatch/ops.hpp"
#include "advpatch/rng.hpp"
#include "advpatch/warp.hpp"

namespace advpatch {
namespace {

constexpr double kPixelFloor = 1e-6;
// Headroom kept inside the hard ball so logit/sigmoid rounding cannot leave it.
constexpr double kBallMargin = 1e-12;

Scalar sigmoid_of(Scalar v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Patch make_patch(std::size_t channels, Tensor mask, std::size_t target) {
  Patch p;
  if (mask.rank() != 2 || mask.dim(0) != mask.dim(1)) throw ShapeError("make_patch: mask must be square, got " + to_string(mask.shape()));
  p.latent = Tensor::zeros({channels, mask.dim(0), mask.dim(1)});
  p.mask = std::move(mask);
  p.target = target;
  return p;
}

void validate(const Patch& patch) {
  if (patch.mask.rank() != 2 || patch.mask.dim(0) != patch.mask.dim(1)) {
    throw ConfigError("patch mask must be square, got " + to_string(patch.mask.shape()));
  }
  const Shape canvas{patch.latent.rank() == 3 ? patch.latent.dim(0) : 0, patch.side(), patch.side()};
  if (patch.latent.shape() != canvas || canvas[0] == 0) {
    throw ConfigError("patch latent " + to_string(patch.latent.shape()) + " does not match mask " +
                      to_string(patch.mask.shape()));
  }
  const auto& m = patch.mask.values();
  if (!((m == 0.0) || (m == 1.0)).all()) throw ConfigError("patch mask is not binary");
  if ((m == 0.0).all()) throw ConfigError("patch mask has no active pixel");
  if (!patch.latent.values().isFinite().all()) throw NumericsError("patch latent contains non-finite values");

  const auto& camo = patch.camouflage;
  if (camo.mode == CamouflageMode::None) return;
  if (camo.reference.shape() != canvas) {
    throw ConfigError("camouflage reference " + to_string(camo.reference.shape()) + " does not match patch canvas " +
                      to_string(canvas));
  }
  if ((camo.reference.values() < 0.0).any() || (camo.reference.values() > 1.0).any()) {
    throw ConfigError("camouflage reference pixels must lie in [0,1]");
  }
  if (camo.mode == CamouflageMode::Hard && !(camo.epsilon > 0.0 && camo.epsilon <= 1.0)) {
    throw ConfigError("hard camouflage epsilon must lie in (0, 1]");
  }
  if (camo.mode == CamouflageMode::Soft && !(camo.lambda >= 0.0)) {
    throw ConfigError("soft camouflage lambda must be >= 0");
  }
}

Tensor pixels(const Patch& patch) { return sigmoid(patch.latent); }

Tensor encode_pixels(const Tensor& pixels) {
  Values v = pixels.values().unaryExpr([](Scalar y) {
    y = std::clamp(y, kPixelFloor, 1.0 - kPixelFloor);
    return std::log(y / (1.0 - y));
  });
  return Tensor(pixels.shape(), std::move(v));
}

void start_from_reference(Patch& patch) {
  if (patch.camouflage.mode == CamouflageMode::None) return;
  patch.latent = encode_pixels(patch.camouflage.reference);
  project_camouflage(patch);
}

void project_camouflage(Patch& patch) {
  const auto& camo = patch.camouflage;
  if (camo.mode != CamouflageMode::Hard) return;
  const Values& ref = camo.reference.values();
  Values latent = patch.latent.values();
  const double radius = camo.epsilon - kBallMargin;
  for (Eigen::Index i = 0; i < latent.size(); ++i) {
    const double lo = std::max(ref[i] - radius, kPixelFloor);
    const double hi = std::min(ref[i] + radius, 1.0 - kPixelFloor);
    const double y = sigmoid_of(latent[i]);
    if (y >= lo && y <= hi) continue;
    // A ball narrower than the pixel floor wins over the floor.
    const double target = lo <= hi ? std::clamp(y, lo, hi)
                                   : std::clamp(y, std::max(ref[i] - radius, 1e-300), std::min(ref[i] + radius, 1.0 - 1e-16));
    latent[i] = std::log(target / (1.0 - target));
  }
  patch.latent = Tensor(patch.latent.shape(), std::move(latent));
}

Tensor circle_mask(std::size_t side) {
  Values v(static_cast<Eigen::Index>(side * side));
  const double r = static_cast<double>(side) / 2;
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      const double dx = static_cast<double>(j) + 0.5 - r, dy = static_cast<double>(i) + 0.5 - r;
      v[static_cast<Eigen::Index>(i * side + j)] = dx * dx + dy * dy <= r * r ? 1.0 : 0.0;
    }
  }
  return Tensor({side, side}, std::move(v));
}

Tensor square_mask(std::size_t side) { return Tensor::full({side, side}, 1.0); }

Tensor peace_mask(std::size_t side) {
  Values v(static_cast<Eigen::Index>(side * side));
  const double r = static_cast<double>(side) / 2;
  const double stroke = std::max(0.75, 0.12 * r);
  auto segment_distance = [](double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
    return std::hypot(px - ax - t * vx, py - ay - t * vy);
  };
  const double diag = (r - stroke) * std::numbers::sqrt2 / 2;
  for (std::size_t i = 0; i < side; ++i) {
    for (std::size_t j = 0; j < side; ++j) {
      const double x = static_cast<double>(j) + 0.5 - r, y = static_cast<double>(i) + 0.5 - r;
      const double d = std::hypot(x, y);
      const bool ring = d <= r && d >= r - 2 * stroke;
      const bool bar = segment_distance(x, y, 0, -r, 0, r) <= stroke;
      const bool legs = segment_distance(x, y, 0, 0, -diag, diag) <= stroke || segment_distance(x, y, 0, 0, diag, diag) <= stroke;
      v[static_cast<Eigen::Index>(i * side + j)] = (ring || ((bar || legs) && d <= r)) ? 1.0 : 0.0;
    }
  }
  return Tensor({side, side}, std::move(v));
}

Tensor tie_dye_pattern(std::size_t channels, std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  const double swirl = uniform(rng, 2.0, 5.0);
  const double rings = uniform(rng, 1.5, 3.5);
  std::vector<double> phase(channels);
  for (auto& p : phase) p = uniform(rng, 0.0, 2 * std::numbers::pi);
  Values v(static_cast<Eigen::Index>(channels * side * side));
  const double r = static_cast<double>(side) / 2;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < side; ++i) {
      for (std::size_t j = 0; j < side; ++j) {
        const double x = (static_cast<double>(j) + 0.5 - r) / r, y = (static_cast<double>(i) + 0.5 - r) / r;
        const double rho = std::hypot(x, y);
        const double angle = std::atan2(y, x) + swirl * rho;
        const double wave = std::sin(3 * angle + rings * 2 * std::numbers::pi * rho + phase[c]);
        v[static_cast<Eigen::Index>((c * side + i) * side + j)] = 0.5 + 0.45 * wave;
      }
    }
  }
  return Tensor({channels, side, side}, std::move(v));
}

Tensor composite(const Tensor& canvas, const Tensor& mask, const Tensor& image, const AffineTransform& t) {
  if (image.rank() != 3 || canvas.rank() != 3 || canvas.dim(0) != image.dim(0)) {
    throw ShapeError("composite: canvas " + to_string(canvas.shape()) + " and image " + to_string(image.shape()) +
                     " disagree");
  }
  if (mask.shape() != Shape{canvas.dim(1), canvas.dim(2)}) {
    throw ShapeError("composite: mask " + to_string(mask.shape()) + " does not match canvas " + to_string(canvas.shape()));
  }
  const WarpPlan plan = make_warp_plan(canvas.dim(1), t, image.dim(1), image.dim(2));
  const Tensor warped_mask = warp_bilinear(mask.detach(), plan);
  const Tensor keep(warped_mask.shape(), 1.0 - warped_mask.values());
  return add(mul(warp_bilinear(canvas, plan), warped_mask), mul(image, keep));
}

Tensor apply_patch(const Patch& patch, const Tensor& image, const AffineTransform& t) {
  return composite(pixels(patch), patch.mask, image, t);
}

}  // namespace advpatch
