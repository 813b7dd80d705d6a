#include "advpatch/attack.hpp"

#include <cmath>

#include "advpatch/ops.hpp"
#include "advpatch/rng.hpp"

namespace advpatch {

Tensor eot_objective(const Patch& patch, std::span<const EotSample> batch, std::span<const Classifier> models) {
  if (batch.empty()) throw ConfigError("eot_objective: empty sample batch");
  if (models.empty()) throw ConfigError("eot_objective: empty model set");
  for (const auto& m : models) {
    if (m.arch.input != models.front().arch.input) throw ConfigError("eot_objective: models disagree on input shape");
    if (patch.target >= m.arch.classes) throw ConfigError("eot_objective: target class out of range for " + m.name());
  }

  const Tensor canvas = pixels(patch);
  std::vector<Tensor> composed;
  composed.reserve(batch.size());
  for (const auto& sample : batch) composed.push_back(composite(canvas, patch.mask, sample.image, sample.transform));
  const Tensor images = stack(composed);

  Tensor total;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const Tensor term = sum(pick(predict_log_prob(models[m], images), patch.target));
    total = m == 0 ? term : add(total, term);
  }
  Tensor objective = scale(total, 1.0 / static_cast<double>(batch.size() * models.size()));

  const auto& camo = patch.camouflage;
  if (camo.mode == CamouflageMode::Soft && camo.lambda > 0.0) {
    const Tensor diff = sub(canvas, camo.reference);
    objective = sub(objective, scale(sum(mul(diff, diff)), camo.lambda));
  }
  return objective;
}

PatchTrainingResult train_patch(const AttackConfig& config, std::span<const Classifier> models,
                                const TransformDistribution& dist, const Dataset& data, Patch init,
                                const StepObserver& observer) {
  init.target = config.target;
  validate(init);
  if (models.empty()) throw ConfigError("train_patch: empty model set");
  if (config.batch < 1) throw ConfigError("train_patch: batch size must be >= 1");
  if (data.train_count() == 0) throw DataError("train_patch: empty train split");
  const auto& shape = data.image_shape();
  check_feasible(dist, shape.height, shape.width);

  PatchTrainingResult result;
  result.patch = std::move(init);
  Patch& patch = result.patch;
  patch.provenance.seed = config.seed;
  patch.provenance.config_hash = config.config_hash;
  patch.provenance.models.clear();
  for (const auto& m : models) patch.provenance.models.push_back(m.name());

  Rng rng(config.seed);
  const auto n = static_cast<Eigen::Index>(patch.latent.size());
  Values first = Values::Zero(n), second = Values::Zero(n);
  const auto& adam = config.adam;
  std::vector<EotSample> batch(config.batch);

  for (std::size_t step = 0; step < config.iterations; ++step) {
    for (auto& sample : batch) {
      sample.image = data.image(data.index(Split::Train, uniform_index(rng, data.train_count())));
      sample.transform = sample_transform(dist, shape.height, shape.width, rng);
    }

    Tape tape;
    Patch tracked = patch;
    tracked.latent = tape.variable(patch.latent);
    Tensor objective;
    try {
      objective = eot_objective(tracked, batch, models);
    } catch (const NumericsError& e) {
      throw NumericsError("train_patch: non-finite objective at step " + std::to_string(step) + " (" + e.what() + ")");
    }
    if (!std::isfinite(objective.item())) {
      throw NumericsError("train_patch: non-finite objective at step " + std::to_string(step));
    }
    result.objective.push_back(objective.item());
    const Values grad = tape.backward(objective).wrt(tracked.latent).values();

    first = adam.beta1 * first + (1.0 - adam.beta1) * grad;
    second = adam.beta2 * second + (1.0 - adam.beta2) * grad.square();
    const double t = static_cast<double>(step + 1);
    const double lr = adam.step * std::sqrt(1.0 - std::pow(adam.beta2, t)) / (1.0 - std::pow(adam.beta1, t));
    patch.latent = Tensor(patch.latent.shape(), patch.latent.values() + lr * first / (second.sqrt() + adam.epsilon));
    project_camouflage(patch);
    patch.provenance.steps = static_cast<std::uint32_t>(step + 1);

    if (observer) observer(step, patch);
  }
  return result;
}

}  // namespace advpatch
