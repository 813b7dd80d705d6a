#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "advpatch/architecture.hpp"
#include "advpatch/dataset.hpp"
#include "advpatch/tensor.hpp"

namespace advpatch {

struct TrainingInfo {
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  double test_accuracy = 0.0;
  std::uint64_t config_hash = 0;

  bool operator==(const TrainingInfo&) const = default;
};

/// A convolutional classifier: architecture plus one weight tensor per entry
/// of parameter_shapes(arch).
struct Classifier {
  Architecture arch;
  std::vector<Tensor> weights;
  TrainingInfo info;

  const std::string& name() const { return arch.name; }
};

/// He-scaled normal weights and zero biases, deterministic per (arch, seed).
Classifier init_weights(const Architecture& arch, std::uint64_t seed);

/// Logits [B x K] for images [B x C x H x W] under explicit weights, which may
/// be tracked for training.
Tensor forward_logits(const Architecture& arch, std::span<const Tensor> weights, const Tensor& images);

/// log Pr(y | x) rows [B x K]. Differentiable with respect to `images`.
Tensor predict_log_prob(const Classifier& model, const Tensor& images);

/// Argmax class per image; ties resolve to the lowest class index.
std::vector<std::size_t> predict_classes(const Classifier& model, const Tensor& images);
std::size_t argmax_lowest(std::span<const Scalar> row);

/// Fraction of argmax-correct predictions on a split.
double accuracy(const Classifier& model, const Dataset& data, Split split);

struct TrainOptions {
  std::size_t epochs = 8;
  std::size_t batch_size = 32;
  double learning_rate = 0.03;
  double momentum = 0.9;
  bool linear_decay = true;  // learning rate falls linearly to zero over the run
  std::uint64_t seed = 1;
};

struct EpochStats {
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainingResult {
  Classifier model;
  std::vector<EpochStats> history;
};

/// Mini-batch SGD with momentum on cross-entropy over the train split.
/// The optional observer sees each finished epoch.
TrainingResult train(Classifier model, const Dataset& data, const TrainOptions& options,
                     const std::function<void(std::size_t epoch, const EpochStats&)>& on_epoch = {});

}  // namespace advpatch
