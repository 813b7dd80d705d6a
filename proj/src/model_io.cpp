#include "advpatch/model_io.hpp"

namespace advpatch {
namespace {

enum LayerTag : std::uint32_t { kConv = 1, kPool = 2, kRelu = 3, kDense = 4 };

std::uint32_t as_u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace

Bytes encode_model(const Classifier& model) {
  ByteWriter w;
  w.raw("APZM");
  w.u32(kModelFormatVersion);
  w.str(model.arch.name);
  w.u32(as_u32(model.arch.input.channels));
  w.u32(as_u32(model.arch.input.height));
  w.u32(as_u32(model.arch.input.width));
  w.u32(as_u32(model.arch.classes));
  w.u32(as_u32(model.arch.layers.size()));
  for (const auto& layer : model.arch.layers) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      w.u32(kConv);
      w.u32(as_u32(c->filters));
      w.u32(as_u32(c->kernel));
      w.u32(as_u32(c->stride));
      w.u32(as_u32(c->pad));
    } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
      w.u32(kPool);
      w.u32(as_u32(p->window));
      w.u32(as_u32(p->stride));
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      w.u32(kRelu);
    } else {
      w.u32(kDense);
      w.u32(as_u32(std::get<DenseLayer>(layer).width));
    }
  }
  w.u32(as_u32(model.weights.size()));
  for (const auto& t : model.weights) {
    w.u32(as_u32(t.rank()));
    for (auto e : t.shape()) w.u32(as_u32(e));
    for (Eigen::Index i = 0; i < t.values().size(); ++i) w.f64(t.values()[i]);
  }
  w.u64(model.info.seed);
  w.u32(model.info.epochs);
  w.f64(model.info.test_accuracy);
  w.u64(model.info.config_hash);
  return w.take();
}

Classifier decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "APZM") throw FormatError("model file: bad magic", 0);
  const auto version_offset = r.offset();
  if (r.u32() != kModelFormatVersion) throw FormatError("model file: unsupported version", version_offset);

  Classifier model;
  model.arch.name = r.str();
  model.arch.input.channels = r.u32();
  model.arch.input.height = r.u32();
  model.arch.input.width = r.u32();
  model.arch.classes = r.u32();
  const auto layer_count = r.u32();
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const auto tag_offset = r.offset();
    switch (r.u32()) {
      case kConv: {
        ConvLayer c;
        c.filters = r.u32();
        c.kernel = r.u32();
        c.stride = r.u32();
        c.pad = r.u32();
        model.arch.layers.emplace_back(c);
        break;
      }
      case kPool: {
        PoolLayer p;
        p.window = r.u32();
        p.stride = r.u32();
        model.arch.layers.emplace_back(p);
        break;
      }
      case kRelu:
        model.arch.layers.emplace_back(ReluLayer{});
        break;
      case kDense:
        model.arch.layers.emplace_back(DenseLayer{r.u32()});
        break;
      default:
        throw FormatError("model file: unknown layer tag", tag_offset);
    }
  }

  const auto weights_offset = r.offset();
  std::vector<Shape> expected;
  try {
    expected = parameter_shapes(model.arch);
  } catch (const ArchitectureError& e) {
    throw FormatError(std::string("model file: ") + e.what(), weights_offset);
  }
  if (r.u32() != expected.size()) throw FormatError("model file: weight tensor count mismatch", weights_offset);
  for (const auto& shape : expected) {
    const auto tensor_offset = r.offset();
    Shape stored(r.u32());
    for (auto& e : stored) e = r.u32();
    if (stored != shape) {
      throw FormatError("model file: weight shape " + to_string(stored) + " does not match " + to_string(shape),
                        tensor_offset);
    }
    Values v(static_cast<Eigen::Index>(numel(shape)));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f64();
    model.weights.emplace_back(shape, std::move(v));
  }
  model.info.seed = r.u64();
  model.info.epochs = r.u32();
  model.info.test_accuracy = r.f64();
  model.info.config_hash = r.u64();
  if (!r.at_end()) throw FormatError("model file: trailing bytes", r.offset());
  return model;
}

void save_model(const Classifier& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(model));
}

Classifier load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace advpatch
