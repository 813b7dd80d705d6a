#pragma once

#include "advpatch/classifier.hpp"

namespace advpatch {

struct PgdOptions {
  double epsilon = 8.0 / 255.0;
  std::size_t steps = 40;
  double step_size = 1.0 / 255.0;
};

/// Targeted L-infinity attack on one image [C x H x W]: signed-gradient ascent
/// on log Pr(target | x'), projected after every step onto the epsilon ball
/// around the input intersected with [0,1].
Tensor pgd_attack(const Classifier& model, const Tensor& image, std::size_t target, const PgdOptions& options = {});

}  // namespace advpatch
