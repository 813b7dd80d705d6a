#include "advpatch/dataset.hpp"

#include <numeric>

namespace advpatch {

Dataset::Dataset(std::string name, ImageShape shape, std::size_t classes, Values pixels,
                 std::vector<std::uint8_t> labels, std::size_t train_count)
    : name_(std::move(name)), shape_(shape), classes_(classes), labels_(std::move(labels)), train_count_(train_count) {
  if (static_cast<std::size_t>(pixels.size()) != labels_.size() * shape_.size()) {
    throw DataError("dataset '" + name_ + "': " + std::to_string(pixels.size()) + " pixel values for " +
                    std::to_string(labels_.size()) + " images");
  }
  if (train_count_ > labels_.size()) throw DataError("dataset '" + name_ + "': train split larger than dataset");
  if ((pixels < 0.0).any() || (pixels > 1.0).any() || !pixels.isFinite().all()) {
    throw DataError("dataset '" + name_ + "': pixel values outside [0,1]");
  }
  for (auto l : labels_) {
    if (l >= classes_) throw DataError("dataset '" + name_ + "': label " + std::to_string(l) + " out of range");
  }
  pixels_ = std::make_shared<const Values>(std::move(pixels));
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out(count(split));
  std::iota(out.begin(), out.end(), index(split, 0));
  return out;
}

Tensor Dataset::image(std::size_t sample) const {
  if (sample >= size()) throw DataError("dataset '" + name_ + "': sample index out of range");
  const auto n = static_cast<Eigen::Index>(shape_.size());
  return Tensor(shape_.single(), pixels_->segment(static_cast<Eigen::Index>(sample) * n, n));
}

Tensor Dataset::batch(std::span<const std::size_t> samples) const {
  const auto n = static_cast<Eigen::Index>(shape_.size());
  Values out(n * static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] >= size()) throw DataError("dataset '" + name_ + "': sample index out of range");
    out.segment(static_cast<Eigen::Index>(i) * n, n) = pixels_->segment(static_cast<Eigen::Index>(samples[i]) * n, n);
  }
  return Tensor(shape_.batch(samples.size()), std::move(out));
}

}  // namespace advpatch
