#pragma once

#include <cstdint>
#include <vector>

#include "advpatch/tensor.hpp"
#include "advpatch/transform.hpp"

namespace advpatch {

/// One bilinear contribution: output pixel `out` receives weight * canvas[in].
struct WarpTap {
  std::uint32_t out;
  std::uint32_t in;
  double weight;
};

/// Sparse linear map from a side x side canvas onto an out_h x out_w image.
struct WarpPlan {
  std::size_t side = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::vector<WarpTap> taps;  // ordered by output pixel
};

/// Inverse-maps every output pixel center through `t` into canvas index space
/// and samples bilinearly; canvas samples outside [0, side) read as zero.
WarpPlan make_warp_plan(std::size_t side, const AffineTransform& t, std::size_t out_h, std::size_t out_w);

/// Warps a [C x P x P] or [P x P] canvas to [C x H x W] or [H x W].
/// Differentiable with respect to the canvas values.
Tensor warp_bilinear(const Tensor& canvas, const WarpPlan& plan);
Tensor warp_bilinear(const Tensor& canvas, const AffineTransform& t, std::size_t out_h, std::size_t out_w);

}  // namespace advpatch
