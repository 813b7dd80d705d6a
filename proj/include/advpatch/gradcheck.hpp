#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "advpatch/tensor.hpp"

namespace advpatch {

/// A differentiable scalar function. Called with a tracked tensor for the
/// analytic pass and with constants for the numeric passes.
using ScalarFunction = std::function<Tensor(const Tensor&)>;

/// Largest per-coordinate |analytic - central| / max(1e-12, |central|) between
/// the reverse-mode gradient of `f` at `point` and central differences of step `h`.
double finite_diff_check(const ScalarFunction& f, const Tensor& point, double h = 1e-6);

struct GradcheckResult {
  std::string op;
  double max_rel_error = 0.0;
};

/// Checks every differentiable primitive, the warp, patch compositing, the
/// classifier forward pass, and the end-to-end EOT objective (4x4 patch,
/// 8x8 image, conv + dense stub network) on seeded well-conditioned points.
std::vector<GradcheckResult> gradcheck_suite(std::uint64_t seed = 7);

}  // namespace advpatch
