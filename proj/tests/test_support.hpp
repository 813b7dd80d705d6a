#pragma once

// Hand-weighted classifiers and tiny datasets shared by the unit tests.

#include <cstdint>
#include <vector>

#include "advpatch/classifier.hpp"
#include "advpatch/rng.hpp"

namespace advpatch::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Values v(static_cast<Eigen::Index>(numel(shape)));
  for (auto& x : v) x = uniform(rng, lo, hi);
  return Tensor(std::move(shape), v);
}

/// Single dense layer with zero weights: logits are the bias.
inline Classifier constant_classifier(const ImageShape& input, std::size_t classes, std::vector<double> logits,
                                      std::string name = "constant") {
  Architecture arch{std::move(name), input, classes, {DenseLayer{classes}}};
  Classifier m = init_weights(arch, 1);
  m.weights[0] = Tensor::zeros(m.weights[0].shape());
  Values bias = Values::Zero(static_cast<Eigen::Index>(classes));
  for (std::size_t k = 0; k < logits.size() && k < classes; ++k) bias[static_cast<Eigen::Index>(k)] = logits[k];
  m.weights[1] = Tensor({classes}, bias);
  return m;
}

/// Predicts `target` exactly when some value in some channel exceeds 0.99,
/// and class 0 otherwise (all-zero logits tie and resolve to the lowest index).
inline Classifier bright_pixel_detector(const ImageShape& input, std::size_t classes, std::size_t target) {
  const std::size_t c = input.channels;
  Architecture arch{"bright", input, classes,
                    {ConvLayer{c, 1, 1, 0}, ReluLayer{}, PoolLayer{input.height, input.height}, DenseLayer{classes}}};
  Classifier m = init_weights(arch, 1);
  Values picks = Values::Zero(static_cast<Eigen::Index>(c * c));
  for (std::size_t f = 0; f < c; ++f) picks[static_cast<Eigen::Index>(f * c + f)] = 1.0;
  m.weights[0] = Tensor({c, c, 1, 1}, picks);
  m.weights[1] = Tensor::full({c}, -0.49);  // inputs arrive centered at 0.5
  Values w = Values::Zero(static_cast<Eigen::Index>(c * classes));
  for (std::size_t f = 0; f < c; ++f) w[static_cast<Eigen::Index>(f * classes + target)] = 1e6;
  m.weights[2] = Tensor({c, classes}, w);
  m.weights[3] = Tensor::zeros({classes});
  return m;
}

}  // namespace advpatch::testing
