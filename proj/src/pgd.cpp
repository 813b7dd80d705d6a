#include "advpatch/pgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advpatch/ops.hpp"

namespace advpatch {

Tensor pgd_attack(const Classifier& model, const Tensor& image, std::size_t target, const PgdOptions& options) {
  if (!(options.epsilon > 0.0)) throw ConfigError("pgd_attack: epsilon must be positive");
  if (target >= model.arch.classes) throw ConfigError("pgd_attack: target class out of range");
  const Shape batched = model.arch.input.batch(1);
  if (image.shape() != model.arch.input.single()) {
    throw ShapeError("pgd_attack: image " + to_string(image.shape()) + " does not match " +
                     to_string(model.arch.input.single()));
  }

  // Box bounds, nudged so the rounded distance to the input never exceeds epsilon.
  const Values& x = image.values();
  Values lo(x.size()), hi(x.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double l = x[i] - options.epsilon, h = x[i] + options.epsilon;
    while (x[i] - l > options.epsilon) l = std::nextafter(l, inf);
    while (h - x[i] > options.epsilon) h = std::nextafter(h, -inf);
    lo[i] = std::max(l, 0.0);
    hi[i] = std::min(h, 1.0);
  }

  Values adv = x;
  for (std::size_t step = 0; step < options.steps; ++step) {
    Tape tape;
    const Tensor input = tape.variable(Tensor(batched, adv));
    const Tensor objective = sum(pick(predict_log_prob(model, input), target));
    const Values grad = tape.backward(objective).wrt(input).values();
    adv = (adv + options.step_size * grad.sign()).max(lo).min(hi);
  }
  return Tensor(image.shape(), std::move(adv));
}

}  // namespace advpatch
