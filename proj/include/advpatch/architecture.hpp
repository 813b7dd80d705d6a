#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "advpatch/tensor.hpp"

namespace advpatch {

struct ImageShape {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;

  std::size_t size() const { return channels * height * width; }
  Shape single() const { return {channels, height, width}; }
  Shape batch(std::size_t n) const { return {n, channels, height, width}; }
  bool operator==(const ImageShape&) const = default;
};

struct ConvLayer {
  std::size_t filters = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 0;
  bool operator==(const ConvLayer&) const = default;
};

struct PoolLayer {
  std::size_t window = 2;
  std::size_t stride = 2;
  bool operator==(const PoolLayer&) const = default;
};

struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};

/// Fully connected layer. The first dense layer flattens its input.
struct DenseLayer {
  std::size_t width = 0;
  bool operator==(const DenseLayer&) const = default;
};

using Layer = std::variant<ConvLayer, PoolLayer, ReluLayer, DenseLayer>;

struct Architecture {
  std::string name;
  ImageShape input;
  std::size_t classes = 10;
  std::vector<Layer> layers;

  bool operator==(const Architecture&) const = default;
};

/// Activation shape (without batch axis) after each layer. Throws
/// ArchitectureError when the chain does not end in `classes` logits.
std::vector<Shape> layer_output_shapes(const Architecture& arch);

/// Weight shapes in declaration order: conv kernels [F x C x K x K] and bias
/// [F]; dense matrices [In x Out] and bias [Out].
std::vector<Shape> parameter_shapes(const Architecture& arch);

/// The five zoo members, in their fixed order.
std::vector<Architecture> zoo_architectures(ImageShape input = {}, std::size_t classes = 10);

}  // namespace advpatch
