#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "advpatch/classifier.hpp"
#include "advpatch/dataset.hpp"
#include "advpatch/patch.hpp"
#include "advpatch/transform.hpp"

namespace advpatch {

struct AdamOptions {
  double step = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamOptions&) const = default;
};

struct AttackConfig {
  std::size_t target = 9;
  std::size_t iterations = 2000;
  std::size_t batch = 16;  // (image, transform) draws per step
  AdamOptions adam;
  std::uint64_t seed = 1;
  std::uint64_t config_hash = 0;
};

/// One draw of the expectation: a background image [C x H x W] and a placement.
struct EotSample {
  Tensor image;
  AffineTransform transform;
};

/// Mean over (sample, model) pairs of log Pr(target | A(p, x, l, t)), minus
/// lambda * ||pixels - reference||^2 under soft camouflage. Differentiable in
/// patch.latent.
Tensor eot_objective(const Patch& patch, std::span<const EotSample> batch, std::span<const Classifier> models);

struct PatchTrainingResult {
  Patch patch;
  std::vector<double> objective;  // value before each step
};

using StepObserver = std::function<void(std::size_t step, const Patch& patch)>;

/// Stochastic gradient ascent on the expected target log-probability with
/// Adam updates on the latent. Every step redraws images from the train split
/// and placements from `dist`; hard camouflage is re-projected after each step.
PatchTrainingResult train_patch(const AttackConfig& config, std::span<const Classifier> models,
                                const TransformDistribution& dist, const Dataset& data, Patch init,
                                const StepObserver& observer = {});

}  // namespace advpatch
