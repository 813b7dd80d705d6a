#include "advpatch/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "advpatch/rng.hpp"

namespace advpatch {
namespace {

enum class Figure { Disk, Square, Triangle, Cross, Ring };

constexpr std::array<const char*, kSyntheticClasses> kClassNames = {
    "red-disk",  "blue-disk",  "red-square", "blue-square", "red-triangle",
    "blue-triangle", "red-cross", "blue-cross", "red-ring", "blue-ring"};

constexpr std::array<std::array<double, 3>, 2> kPalette = {{{0.85, 0.15, 0.12}, {0.12, 0.25, 0.88}}};

bool inside(Figure f, double u, double v) {
  switch (f) {
    case Figure::Disk:
      return u * u + v * v <= 1.0;
    case Figure::Square:
      return std::max(std::abs(u), std::abs(v)) <= 0.8;
    case Figure::Triangle:
      return v <= 0.75 && v >= 2.0 * std::abs(u) - 0.95;
    case Figure::Cross:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 0.95) || (std::abs(v) <= 0.3 && std::abs(u) <= 0.95);
    case Figure::Ring: {
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.55 * 0.55;
    }
  }
  return false;
}

void render(std::uint64_t seed, std::size_t label, Eigen::Ref<Values> out) {
  constexpr std::size_t kSide = 32;
  constexpr std::size_t kPlane = kSide * kSide;
  Rng rng(seed);

  // Low-saturation background with two sinusoidal ripples and pixel noise.
  const double gray = uniform(rng, 0.35, 0.65);
  std::array<double, 3> tint{};
  for (auto& t : tint) t = gray + uniform(rng, -0.05, 0.05);
  struct Ripple {
    double fx, fy, phase, amp;
  };
  std::array<Ripple, 2> ripples{};
  for (auto& r : ripples) {
    const double angle = uniform(rng, 0.0, 2 * std::numbers::pi);
    const double freq = uniform(rng, 0.15, 0.6);
    r = {freq * std::cos(angle), freq * std::sin(angle), uniform(rng, 0.0, 2 * std::numbers::pi),
         uniform(rng, 0.03, 0.08)};
  }

  const auto figure = static_cast<Figure>(label / 2);
  std::array<double, 3> color = kPalette[label % 2];
  for (auto& c : color) c = std::clamp(c + uniform(rng, -0.08, 0.08), 0.0, 1.0);
  const double radius = uniform(rng, 6.0, 10.0);
  const double cx = uniform(rng, radius + 1.0, kSide - radius - 1.0);
  const double cy = uniform(rng, radius + 1.0, kSide - radius - 1.0);
  const double angle = uniform(rng, -0.4, 0.4);
  const double ca = std::cos(angle), sa = std::sin(angle);

  for (std::size_t i = 0; i < kSide; ++i) {
    for (std::size_t j = 0; j < kSide; ++j) {
      double coverage = 0.0;
      for (int si = 0; si < 2; ++si) {
        for (int sj = 0; sj < 2; ++sj) {
          const double dx = (static_cast<double>(j) + 0.25 + 0.5 * sj - cx) / radius;
          const double dy = (static_cast<double>(i) + 0.25 + 0.5 * si - cy) / radius;
          coverage += inside(figure, ca * dx + sa * dy, -sa * dx + ca * dy) ? 0.25 : 0.0;
        }
      }
      double texture = 0.0;
      for (const auto& r : ripples) texture += r.amp * std::sin(r.fx * static_cast<double>(j) + r.fy * static_cast<double>(i) + r.phase);
      for (std::size_t c = 0; c < 3; ++c) {
        const double bg = std::clamp(tint[c] + texture + uniform(rng, -0.04, 0.04), 0.0, 1.0);
        out[static_cast<Eigen::Index>(c * kPlane + i * kSide + j)] = (1.0 - coverage) * bg + coverage * color[c];
      }
    }
  }
}

}  // namespace

const char* synthetic_class_name(std::size_t label) { return kClassNames.at(label); }

Dataset generate_synthetic(std::uint64_t seed, std::size_t train_count, std::size_t test_count) {
  for (auto count : {train_count, test_count}) {
    if (count < 10 * kSyntheticClasses || count % kSyntheticClasses != 0) {
      throw ConfigError("generate_synthetic: split sizes must be multiples of 10 with at least 10 images per class, got " +
                        std::to_string(count));
    }
  }
  const ImageShape shape{3, 32, 32};
  const std::size_t total = train_count + test_count;
  const auto n = static_cast<Eigen::Index>(shape.size());
  Values pixels(n * static_cast<Eigen::Index>(total));
  std::vector<std::uint8_t> labels(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t split_index = i < train_count ? i : i - train_count;
    labels[i] = static_cast<std::uint8_t>(split_index % kSyntheticClasses);
    const std::uint64_t stream = child_seed(seed, (i < train_count ? 0ULL : 1ULL << 62) + split_index);
    render(stream, labels[i], pixels.segment(static_cast<Eigen::Index>(i) * n, n));
  }
  return Dataset("synthetic-shapes", shape, kSyntheticClasses, std::move(pixels), std::move(labels), train_count);
}

}  // namespace advpatch
