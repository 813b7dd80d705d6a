#include "advpatch/warp.hpp"

#include <algorithm>
#include <cmath>

namespace advpatch {

WarpPlan make_warp_plan(std::size_t side, const AffineTransform& t, std::size_t out_h, std::size_t out_w) {
  if (side == 0) throw ConfigError("warp: empty canvas");
  const std::size_t footprint = footprint_side(t.scale, out_h, out_w);
  if (!std::isfinite(t.rotation) || !std::isfinite(t.center_x) || !std::isfinite(t.center_y)) {
    throw ConfigError("warp: non-finite transform");
  }

  WarpPlan plan{side, out_h, out_w, {}};
  const double zoom = static_cast<double>(side) / static_cast<double>(footprint);
  const double c = std::cos(t.rotation), s = std::sin(t.rotation);
  const double half = static_cast<double>(side) / 2;
  // Output pixels that can reach the canvas lie within this radius of the center.
  const double reach = (static_cast<double>(footprint) / 2 + 0.5 / zoom + 1.0) * std::sqrt(2.0) + 1.0;
  const auto clip = [](double v, std::size_t n) {
    return static_cast<std::ptrdiff_t>(std::clamp(v, 0.0, static_cast<double>(n)));
  };
  const auto row_lo = clip(std::floor(t.center_y - reach), out_h), row_hi = clip(std::ceil(t.center_y + reach), out_h);
  const auto col_lo = clip(std::floor(t.center_x - reach), out_w), col_hi = clip(std::ceil(t.center_x + reach), out_w);
  const auto p = static_cast<std::ptrdiff_t>(side);

  for (auto i = row_lo; i < row_hi; ++i) {
    for (auto j = col_lo; j < col_hi; ++j) {
      const double dx = static_cast<double>(j) + 0.5 - t.center_x;
      const double dy = static_cast<double>(i) + 0.5 - t.center_y;
      // rotate by -rotation, then rescale footprint pixels to canvas pixels
      const double a = (c * dx + s * dy) * zoom + half - 0.5;
      const double b = (-s * dx + c * dy) * zoom + half - 0.5;
      if (a <= -1.0 || b <= -1.0 || a >= static_cast<double>(side) || b >= static_cast<double>(side)) continue;
      const double fa = std::floor(a), fb = std::floor(b);
      const auto x0 = static_cast<std::ptrdiff_t>(fa), y0 = static_cast<std::ptrdiff_t>(fb);
      const double wx = a - fa, wy = b - fb;
      const auto out = static_cast<std::uint32_t>(static_cast<std::size_t>(i) * out_w + static_cast<std::size_t>(j));
      const std::ptrdiff_t ys[2] = {y0, y0 + 1}, xs[2] = {x0, x0 + 1};
      const double wys[2] = {1.0 - wy, wy}, wxs[2] = {1.0 - wx, wx};
      for (int u = 0; u < 2; ++u) {
        for (int v = 0; v < 2; ++v) {
          const double w = wys[u] * wxs[v];
          if (w == 0.0 || ys[u] < 0 || ys[u] >= p || xs[v] < 0 || xs[v] >= p) continue;
          plan.taps.push_back({out, static_cast<std::uint32_t>(ys[u] * p + xs[v]), w});
        }
      }
    }
  }
  return plan;
}

Tensor warp_bilinear(const Tensor& canvas, const WarpPlan& plan) {
  const bool planar = canvas.rank() == 2;
  if (!(planar || canvas.rank() == 3) || canvas.dim(canvas.rank() - 1) != plan.side ||
      canvas.dim(canvas.rank() - 2) != plan.side) {
    throw ShapeError("warp_bilinear: canvas " + to_string(canvas.shape()) + " does not match a " +
                     std::to_string(plan.side) + "x" + std::to_string(plan.side) + " plan");
  }
  require_finite("warp_bilinear", canvas);
  const std::size_t channels = planar ? 1 : canvas.dim(0);
  const auto in_plane = static_cast<Eigen::Index>(plan.side * plan.side);
  const auto out_plane = static_cast<Eigen::Index>(plan.out_h * plan.out_w);

  Values out = Values::Zero(out_plane * static_cast<Eigen::Index>(channels));
  for (Eigen::Index ch = 0; ch < static_cast<Eigen::Index>(channels); ++ch) {
    const Scalar* src = canvas.values().data() + ch * in_plane;
    Scalar* dst = out.data() + ch * out_plane;
    for (const auto& tap : plan.taps) dst[tap.out] += tap.weight * src[tap.in];
  }
  Shape shape = planar ? Shape{plan.out_h, plan.out_w} : Shape{channels, plan.out_h, plan.out_w};
  const Tensor* inputs[] = {&canvas};
  return record_op("warp_bilinear", inputs, std::move(shape), std::move(out),
                   [plan, channels, in_plane, out_plane](const Values& up, std::span<Values* const> g) {
                     if (!g[0]) return;
                     for (Eigen::Index ch = 0; ch < static_cast<Eigen::Index>(channels); ++ch) {
                       Scalar* dsrc = g[0]->data() + ch * in_plane;
                       const Scalar* dout = up.data() + ch * out_plane;
                       for (const auto& tap : plan.taps) dsrc[tap.in] += tap.weight * dout[tap.out];
                     }
                   });
}

Tensor warp_bilinear(const Tensor& canvas, const AffineTransform& t, std::size_t out_h, std::size_t out_w) {
  const std::size_t side = canvas.rank() >= 2 ? canvas.dim(canvas.rank() - 1) : 0;
  return warp_bilinear(canvas, make_warp_plan(side, t, out_h, out_w));
}

}  // namespace advpatch
