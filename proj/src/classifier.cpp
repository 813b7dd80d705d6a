#include "advpatch/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "advpatch/ops.hpp"
#include "advpatch/rng.hpp"

namespace advpatch {

Classifier init_weights(const Architecture& arch, std::uint64_t seed) {
  Classifier model;
  model.arch = arch;
  model.info.seed = seed;
  Rng rng(seed);
  for (const auto& shape : parameter_shapes(arch)) {
    if (shape.size() == 1) {
      model.weights.push_back(Tensor::zeros(shape));
      continue;
    }
    // fan-in: C*K*K for kernels, In for dense matrices
    const std::size_t fan_in = shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Values v(static_cast<Eigen::Index>(numel(shape)));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    model.weights.emplace_back(shape, std::move(v));
  }
  return model;
}

Tensor forward_logits(const Architecture& arch, std::span<const Tensor> weights, const Tensor& images) {
  if (images.rank() != 4 || Shape(images.shape().begin() + 1, images.shape().end()) != arch.input.single()) {
    throw ShapeError("classifier '" + arch.name + "': input " + to_string(images.shape()) + " does not match " +
                     to_string(arch.input.single()));
  }
  const std::size_t batch = images.dim(0);
  // Inputs are centered on mid-gray before the first layer.
  Tensor h = add(images, Tensor::full(arch.input.single(), -0.5));
  std::size_t w = 0;
  for (const auto& layer : arch.layers) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      h = add_channel_bias(conv2d(h, weights[w], c->stride, c->pad), weights[w + 1]);
      w += 2;
    } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
      h = maxpool2d(h, p->window, p->stride);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      h = relu(h);
    } else {
      if (h.rank() != 2) h = reshape(h, {batch, h.size() / batch});
      h = add(matmul(h, weights[w]), weights[w + 1]);
      w += 2;
    }
  }
  return h;
}

Tensor predict_log_prob(const Classifier& model, const Tensor& images) {
  return log_softmax(forward_logits(model.arch, model.weights, images));
}

std::size_t argmax_lowest(std::span<const Scalar> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

std::vector<std::size_t> predict_classes(const Classifier& model, const Tensor& images) {
  const Tensor logits = forward_logits(model.arch, model.weights, images.detach());
  const std::size_t k = logits.dim(1);
  std::vector<std::size_t> out(logits.dim(0));
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b] = argmax_lowest(std::span(logits.values().data() + b * k, k));
  }
  return out;
}

double accuracy(const Classifier& model, const Dataset& data, Split split) {
  const std::size_t n = data.count(split);
  if (n == 0) throw DataError("accuracy: empty split of dataset '" + data.name() + "'");
  constexpr std::size_t chunk = 100;
  std::size_t correct = 0;
  std::vector<std::size_t> samples;
  for (std::size_t start = 0; start < n; start += chunk) {
    samples.clear();
    for (std::size_t i = start; i < std::min(n, start + chunk); ++i) samples.push_back(data.index(split, i));
    const auto predicted = predict_classes(model, data.batch(samples));
    for (std::size_t i = 0; i < samples.size(); ++i) correct += predicted[i] == data.label(samples[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TrainingResult train(Classifier model, const Dataset& data, const TrainOptions& options,
                     const std::function<void(std::size_t, const EpochStats&)>& on_epoch) {
  if (data.train_count() == 0) throw DataError("train: dataset '" + data.name() + "' has an empty train split");
  if (options.epochs < 1 || options.batch_size < 1 || !(options.learning_rate >= 0)) {
    throw ConfigError("train: epochs and batch size must be >= 1 and learning rate non-negative");
  }
  if (data.image_shape() != model.arch.input) {
    throw ShapeError("train: dataset images do not match the input shape of '" + model.name() + "'");
  }

  Rng rng(options.seed);
  std::vector<Values> velocity;
  for (const auto& w : model.weights) velocity.push_back(Values::Zero(static_cast<Eigen::Index>(w.size())));

  std::vector<std::size_t> order = data.indices(Split::Train);
  const std::size_t per_epoch = (order.size() + options.batch_size - 1) / options.batch_size;
  const double total_steps = static_cast<double>(per_epoch * options.epochs);
  std::size_t step = 0;
  std::vector<std::size_t> samples, labels;
  TrainingResult result;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      samples.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
      labels.resize(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = data.label(samples[i]);

      Tape tape;
      std::vector<Tensor> params;
      for (const auto& w : model.weights) params.push_back(tape.variable(w));
      Tensor loss;
      try {
        const Tensor logp = log_softmax(forward_logits(model.arch, params, data.batch(samples)));
        loss = scale(mean(pick(logp, labels)), -1.0);
      } catch (const NumericsError& e) {
        throw NumericsError("train: diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches) +
                            " (" + e.what() + ")");
      }
      if (!std::isfinite(loss.item())) {
        throw NumericsError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches));
      }
      loss_sum += loss.item();
      const Gradient grad = tape.backward(loss);
      const double rate =
          options.linear_decay ? options.learning_rate * (1.0 - static_cast<double>(step++) / total_steps) : options.learning_rate;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Values g = grad.wrt(params[i]).values();
        if (!g.isFinite().all()) {
          throw NumericsError("train: non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches));
        }
        velocity[i] = options.momentum * velocity[i] + g;
        model.weights[i] = Tensor(model.weights[i].shape(), model.weights[i].values() - rate * velocity[i]);
      }
    }
    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.test_accuracy = data.test_count() > 0 ? accuracy(model, data, Split::Test) : 0.0;
    result.history.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);
  }
  model.info.epochs = static_cast<std::uint32_t>(options.epochs);
  model.info.test_accuracy = result.history.back().test_accuracy;
  result.model = std::move(model);
  return result;
}

}  // namespace advpatch
