#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "advpatch/architecture.hpp"
#include "advpatch/tensor.hpp"

namespace advpatch {

enum class Split { Train, Test };

/// Labelled images in [0,1], channel-planar. The first `train_count` samples
/// form the train split and the rest the test split.
class Dataset {
 public:
  Dataset(std::string name, ImageShape shape, std::size_t classes, Values pixels, std::vector<std::uint8_t> labels,
          std::size_t train_count);

  const std::string& name() const { return name_; }
  const ImageShape& image_shape() const { return shape_; }
  std::size_t classes() const { return classes_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t train_count() const { return train_count_; }
  std::size_t test_count() const { return labels_.size() - train_count_; }
  std::size_t count(Split split) const { return split == Split::Train ? train_count() : test_count(); }

  /// Global sample index of the `i`-th member of `split`.
  std::size_t index(Split split, std::size_t i) const { return split == Split::Train ? i : train_count_ + i; }
  std::vector<std::size_t> indices(Split split) const;

  std::size_t label(std::size_t sample) const { return labels_.at(sample); }
  std::span<const std::uint8_t> labels() const { return labels_; }

  /// [C x H x W]
  Tensor image(std::size_t sample) const;
  /// [B x C x H x W]
  Tensor batch(std::span<const std::size_t> samples) const;
  const Values& pixels() const { return *pixels_; }

 private:
  std::string name_;
  ImageShape shape_;
  std::size_t classes_;
  std::shared_ptr<const Values> pixels_;
  std::vector<std::uint8_t> labels_;
  std::size_t train_count_;
};

}  // namespace advpatch
