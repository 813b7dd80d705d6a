#include "advpatch/architecture.hpp"

#include <string>

namespace advpatch {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void bad(const Architecture& arch, std::size_t layer, const std::string& why) {
  throw ArchitectureError("architecture '" + arch.name + "' layer " + std::to_string(layer) + ": " + why);
}

}  // namespace

std::vector<Shape> layer_output_shapes(const Architecture& arch) {
  if (arch.input.channels == 0 || arch.input.height == 0 || arch.input.width == 0) {
    throw ArchitectureError("architecture '" + arch.name + "': empty input shape");
  }
  if (arch.layers.empty()) throw ArchitectureError("architecture '" + arch.name + "': no layers");

  Shape current = arch.input.single();
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    std::visit(Overloaded{
                   [&](const ConvLayer& c) {
                     if (current.size() != 3) bad(arch, i, "convolution after a dense layer");
                     if (c.filters == 0) bad(arch, i, "convolution with zero filters");
                     if (c.kernel == 0 || c.stride == 0) bad(arch, i, "kernel and stride must be positive");
                     if (current[1] + 2 * c.pad < c.kernel || current[2] + 2 * c.pad < c.kernel) {
                       bad(arch, i, "kernel larger than padded input " + to_string(current));
                     }
                     current = {c.filters, (current[1] + 2 * c.pad - c.kernel) / c.stride + 1,
                                (current[2] + 2 * c.pad - c.kernel) / c.stride + 1};
                   },
                   [&](const PoolLayer& p) {
                     if (current.size() != 3) bad(arch, i, "pooling after a dense layer");
                     if (p.window == 0 || p.stride == 0) bad(arch, i, "window and stride must be positive");
                     if (current[1] < p.window || current[2] < p.window) {
                       bad(arch, i, "pool window larger than input " + to_string(current));
                     }
                     current = {current[0], (current[1] - p.window) / p.stride + 1,
                                (current[2] - p.window) / p.stride + 1};
                   },
                   [&](const ReluLayer&) {},
                   [&](const DenseLayer& d) {
                     if (d.width == 0) bad(arch, i, "dense layer with zero width");
                     current = {d.width};
                   },
               },
               arch.layers[i]);
    shapes.push_back(current);
  }
  if (!std::holds_alternative<DenseLayer>(arch.layers.back()) || current != Shape{arch.classes}) {
    throw ArchitectureError("architecture '" + arch.name + "': output " + to_string(current) + " is not " +
                            std::to_string(arch.classes) + " logits from a final dense layer");
  }
  return shapes;
}

std::vector<Shape> parameter_shapes(const Architecture& arch) {
  const auto outputs = layer_output_shapes(arch);
  std::vector<Shape> params;
  Shape current = arch.input.single();
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (const auto* c = std::get_if<ConvLayer>(&arch.layers[i])) {
      params.push_back({c->filters, current[0], c->kernel, c->kernel});
      params.push_back({c->filters});
    } else if (const auto* d = std::get_if<DenseLayer>(&arch.layers[i])) {
      params.push_back({numel(current), d->width});
      params.push_back({d->width});
    }
    current = outputs[i];
  }
  return params;
}

std::vector<Architecture> zoo_architectures(ImageShape input, std::size_t classes) {
  const ReluLayer relu;
  const PoolLayer pool{2, 2};
  std::vector<Architecture> zoo;
  zoo.push_back({"conv3", input, classes,
                 {ConvLayer{8, 3, 1, 1}, relu, pool, ConvLayer{16, 3, 1, 1}, relu, pool, ConvLayer{32, 3, 1, 1}, relu,
                  pool, DenseLayer{classes}}});
  zoo.push_back({"conv5", input, classes,
                 {ConvLayer{8, 5, 1, 2}, relu, pool, ConvLayer{16, 5, 1, 2}, relu, pool, ConvLayer{32, 5, 1, 2}, relu,
                  pool, DenseLayer{classes}}});
  zoo.push_back({"stride2", input, classes,
                 {ConvLayer{16, 3, 2, 1}, relu, ConvLayer{32, 3, 2, 1}, relu, ConvLayer{64, 3, 2, 1}, relu,
                  DenseLayer{classes}}});
  zoo.push_back({"deep4", input, classes,
                 {ConvLayer{8, 3, 1, 1}, relu, pool, ConvLayer{16, 3, 1, 1}, relu, pool, ConvLayer{32, 3, 1, 1}, relu,
                  pool, ConvLayer{64, 3, 1, 1}, relu, pool, DenseLayer{32}, relu, DenseLayer{classes}}});
  zoo.push_back({"wide3", input, classes,
                 {ConvLayer{16, 3, 1, 1}, relu, pool, ConvLayer{32, 3, 1, 1}, relu, pool, ConvLayer{32, 3, 1, 1}, relu,
                  pool, DenseLayer{64}, relu, DenseLayer{classes}}});
  return zoo;
}

}  // namespace advpatch
