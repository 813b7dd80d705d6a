#include "advpatch/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace advpatch {
namespace {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     to_string(t.shape()));
  }
}

Shape drop_leading(const Shape& s) { return s.empty() ? s : Shape(s.begin() + 1, s.end()); }

enum class Broadcast { None, RepeatB, RepeatA };

Broadcast broadcast_rule(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::None;
  if (a.rank() >= 1 && drop_leading(a.shape()) == b.shape()) return Broadcast::RepeatB;
  if (b.rank() >= 1 && drop_leading(b.shape()) == a.shape()) return Broadcast::RepeatA;
  shape_mismatch(op, a.shape(), b.shape());
}

// Views a batched operand as [batch x inner] columns so the smaller operand can
// be replicated per row.
using ColMatrixMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;

template <typename Combine, typename GradA, typename GradB>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Combine combine, GradA grad_a, GradB grad_b) {
  require_finite(op, a);
  require_finite(op, b);
  const auto rule = broadcast_rule(op, a, b);
  const Tensor& big = rule == Broadcast::RepeatA ? b : a;
  const auto inner = static_cast<Eigen::Index>(rule == Broadcast::None ? big.size() : numel(drop_leading(big.shape())));
  const auto rows = static_cast<Eigen::Index>(big.size()) / std::max<Eigen::Index>(inner, 1);

  auto expand = [&](const Tensor& t) -> Values {
    if (static_cast<Eigen::Index>(t.size()) == inner * rows) return t.values();
    return t.values().replicate(rows, 1);
  };
  Values av = expand(a);
  Values bv = expand(b);
  Values out = combine(av, bv);

  auto fold = [rows, inner](const Values& g, std::size_t target_size) -> Values {
    if (static_cast<Eigen::Index>(target_size) == g.size()) return g;
    return ColMatrixMap(g.data(), inner, rows).rowwise().sum();
  };
  const std::size_t a_size = a.size();
  const std::size_t b_size = b.size();
  const Tensor* inputs[] = {&a, &b};
  return record_op(op, inputs, big.shape(), std::move(out),
                   [av = std::move(av), bv = std::move(bv), fold, a_size, b_size, grad_a, grad_b](
                       const Values& up, std::span<Values* const> g) {
                     if (g[0]) *g[0] += fold(grad_a(up, av, bv), a_size);
                     if (g[1]) *g[1] += fold(grad_b(up, av, bv), b_size);
                   });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](const Values& x, const Values& y) -> Values { return x + y; },
      [](const Values& up, const Values&, const Values&) -> Values { return up; },
      [](const Values& up, const Values&, const Values&) -> Values { return up; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](const Values& x, const Values& y) -> Values { return x - y; },
      [](const Values& up, const Values&, const Values&) -> Values { return up; },
      [](const Values& up, const Values&, const Values&) -> Values { return -up; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](const Values& x, const Values& y) -> Values { return x * y; },
      [](const Values& up, const Values&, const Values& y) -> Values { return up * y; },
      [](const Values& up, const Values& x, const Values&) -> Values { return up * x; });
}

Tensor scale(const Tensor& a, Scalar factor) {
  require_finite("scale", a);
  const Tensor* inputs[] = {&a};
  return record_op("scale", inputs, a.shape(), a.values() * factor,
                   [factor](const Values& up, std::span<Values* const> g) {
                     if (g[0]) *g[0] += up * factor;
                   });
}

Tensor sum(const Tensor& a) {
  require_finite("sum", a);
  const Tensor* inputs[] = {&a};
  return record_op("sum", inputs, {}, Values::Constant(1, a.values().sum()),
                   [](const Values& up, std::span<Values* const> g) {
                     if (g[0]) *g[0] += up[0];
                   });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<Scalar>(a.size())); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) shape_mismatch("reshape", a.shape(), shape);
  const Tensor* inputs[] = {&a};
  return record_op("reshape", inputs, std::move(shape), a.values(), [](const Values& up, std::span<Values* const> g) {
    if (g[0]) *g[0] += up;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) shape_mismatch("matmul", a.shape(), b.shape());
  require_finite("matmul", a);
  require_finite("matmul", b);
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));

  Values out(m * n);
  RowMap(out.data(), m, n).noalias() = ConstRowMap(a.values().data(), m, k) * ConstRowMap(b.values().data(), k, n);

  const Tensor* inputs[] = {&a, &b};
  return record_op("matmul", inputs, {a.dim(0), b.dim(1)}, std::move(out),
                   [av = a.values(), bv = b.values(), m, k, n](const Values& up, std::span<Values* const> g) {
                     ConstRowMap dout(up.data(), m, n);
                     if (g[0]) RowMap(g[0]->data(), m, k).noalias() += dout * ConstRowMap(bv.data(), k, n).transpose();
                     if (g[1]) RowMap(g[1]->data(), k, n).noalias() += ConstRowMap(av.data(), m, k).transpose() * dout;
                   });
}

namespace {

struct ConvGeometry {
  Eigen::Index batch, channels, height, width;
  Eigen::Index filters, kh, kw;
  Eigen::Index stride, pad;
  Eigen::Index out_h, out_w;

  Eigen::Index patch_rows() const { return channels * kh * kw; }
  Eigen::Index out_pixels() const { return out_h * out_w; }
};

void im2col(const Scalar* image, const ConvGeometry& g, RowMatrix& col) {
  col.resize(g.patch_rows(), g.out_pixels());
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < g.channels; ++c) {
    const Scalar* plane = image + c * g.height * g.width;
    for (Eigen::Index ki = 0; ki < g.kh; ++ki) {
      for (Eigen::Index kj = 0; kj < g.kw; ++kj, ++row) {
        Scalar* dst = col.data() + row * g.out_pixels();
        for (Eigen::Index oi = 0; oi < g.out_h; ++oi) {
          const Eigen::Index ii = oi * g.stride + ki - g.pad;
          for (Eigen::Index oj = 0; oj < g.out_w; ++oj) {
            const Eigen::Index jj = oj * g.stride + kj - g.pad;
            *dst++ = (ii >= 0 && ii < g.height && jj >= 0 && jj < g.width) ? plane[ii * g.width + jj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const RowMatrix& col, const ConvGeometry& g, Scalar* image) {
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < g.channels; ++c) {
    Scalar* plane = image + c * g.height * g.width;
    for (Eigen::Index ki = 0; ki < g.kh; ++ki) {
      for (Eigen::Index kj = 0; kj < g.kw; ++kj, ++row) {
        const Scalar* src = col.data() + row * g.out_pixels();
        for (Eigen::Index oi = 0; oi < g.out_h; ++oi) {
          const Eigen::Index ii = oi * g.stride + ki - g.pad;
          for (Eigen::Index oj = 0; oj < g.out_w; ++oj, ++src) {
            const Eigen::Index jj = oj * g.stride + kj - g.pad;
            if (ii >= 0 && ii < g.height && jj >= 0 && jj < g.width) plane[ii * g.width + jj] += *src;
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride, std::size_t pad) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", kernels, 4);
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (x.dim(1) != kernels.dim(1) || x.dim(2) + 2 * pad < kernels.dim(2) || x.dim(3) + 2 * pad < kernels.dim(3)) {
    shape_mismatch("conv2d", x.shape(), kernels.shape());
  }
  require_finite("conv2d", x);
  require_finite("conv2d", kernels);

  ConvGeometry g{};
  g.batch = static_cast<Eigen::Index>(x.dim(0));
  g.channels = static_cast<Eigen::Index>(x.dim(1));
  g.height = static_cast<Eigen::Index>(x.dim(2));
  g.width = static_cast<Eigen::Index>(x.dim(3));
  g.filters = static_cast<Eigen::Index>(kernels.dim(0));
  g.kh = static_cast<Eigen::Index>(kernels.dim(2));
  g.kw = static_cast<Eigen::Index>(kernels.dim(3));
  g.stride = static_cast<Eigen::Index>(stride);
  g.pad = static_cast<Eigen::Index>(pad);
  g.out_h = (g.height + 2 * g.pad - g.kh) / g.stride + 1;
  g.out_w = (g.width + 2 * g.pad - g.kw) / g.stride + 1;

  const Eigen::Index in_plane = g.channels * g.height * g.width;
  const Eigen::Index out_plane = g.filters * g.out_pixels();
  ConstRowMap kmat(kernels.values().data(), g.filters, g.patch_rows());

  auto cols = std::make_shared<std::vector<RowMatrix>>(static_cast<std::size_t>(g.batch));
  Values out(g.batch * out_plane);
  for (Eigen::Index b = 0; b < g.batch; ++b) {
    auto& col = (*cols)[static_cast<std::size_t>(b)];
    im2col(x.values().data() + b * in_plane, g, col);
    RowMap(out.data() + b * out_plane, g.filters, g.out_pixels()).noalias() = kmat * col;
  }

  const Tensor* inputs[] = {&x, &kernels};
  Shape out_shape{x.dim(0), kernels.dim(0), static_cast<std::size_t>(g.out_h), static_cast<std::size_t>(g.out_w)};
  return record_op("conv2d", inputs, std::move(out_shape), std::move(out),
                   [g, cols, kv = kernels.values(), in_plane, out_plane](const Values& up,
                                                                       std::span<Values* const> grads) {
                     ConstRowMap kmat(kv.data(), g.filters, g.patch_rows());
                     RowMatrix dcol;
                     for (Eigen::Index b = 0; b < g.batch; ++b) {
                       ConstRowMap dout(up.data() + b * out_plane, g.filters, g.out_pixels());
                       const auto& col = (*cols)[static_cast<std::size_t>(b)];
                       if (grads[1]) {
                         RowMap(grads[1]->data(), g.filters, g.patch_rows()).noalias() += dout * col.transpose();
                       }
                       if (grads[0]) {
                         dcol.noalias() = kmat.transpose() * dout;
                         col2im_add(dcol, g, grads[0]->data() + b * in_plane);
                       }
                     }
                   });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank("add_channel_bias", x, 4);
  require_rank("add_channel_bias", bias, 1);
  if (x.dim(1) != bias.dim(0)) shape_mismatch("add_channel_bias", x.shape(), bias.shape());
  require_finite("add_channel_bias", x);
  require_finite("add_channel_bias", bias);

  const auto batch = static_cast<Eigen::Index>(x.dim(0));
  const auto channels = static_cast<Eigen::Index>(x.dim(1));
  const auto plane = static_cast<Eigen::Index>(x.dim(2) * x.dim(3));
  Values out = x.values();
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index c = 0; c < channels; ++c) out.segment((b * channels + c) * plane, plane) += bias.values()[c];
  }
  const Tensor* inputs[] = {&x, &bias};
  return record_op("add_channel_bias", inputs, x.shape(), std::move(out),
                   [batch, channels, plane](const Values& up, std::span<Values* const> g) {
                     if (g[0]) *g[0] += up;
                     if (g[1]) {
                       for (Eigen::Index b = 0; b < batch; ++b) {
                         for (Eigen::Index c = 0; c < channels; ++c) {
                           (*g[1])[c] += up.segment((b * channels + c) * plane, plane).sum();
                         }
                       }
                     }
                   });
}

Tensor relu(const Tensor& x) {
  require_finite("relu", x);
  const Tensor* inputs[] = {&x};
  Values out = x.values().max(0.0);
  return record_op("relu", inputs, x.shape(), std::move(out), [xv = x.values()](const Values& up, std::span<Values* const> g) {
    if (g[0]) *g[0] += (xv > 0.0).select(up, 0.0);
  });
}

Tensor sigmoid(const Tensor& x) {
  require_finite("sigmoid", x);
  // Split by sign so exp never overflows.
  Values out = x.values().unaryExpr([](Scalar v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (1.0 + e);
  });
  const Tensor* inputs[] = {&x};
  Values saved = out;
  return record_op("sigmoid", inputs, x.shape(), std::move(out),
                   [y = std::move(saved)](const Values& up, std::span<Values* const> g) {
                     if (g[0]) *g[0] += up * y * (1.0 - y);
                   });
}

Tensor maxpool2d(const Tensor& x, std::size_t window, std::size_t stride) {
  require_rank("maxpool2d", x, 4);
  if (window < 1 || stride < 1) throw ShapeError("maxpool2d: window and stride must be >= 1");
  if (x.dim(2) < window || x.dim(3) < window) shape_mismatch("maxpool2d", x.shape(), {window, window});
  require_finite("maxpool2d", x);

  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3);
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  Values out(static_cast<Eigen::Index>(planes * oh * ow));
  std::vector<std::size_t> argmax(planes * oh * ow);
  const Scalar* in = x.values().data();

  std::size_t o = 0;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oi = 0; oi < oh; ++oi) {
      for (std::size_t oj = 0; oj < ow; ++oj, ++o) {
        std::size_t best = p * h * w + oi * stride * w + oj * stride;
        for (std::size_t di = 0; di < window; ++di) {
          for (std::size_t dj = 0; dj < window; ++dj) {
            const std::size_t idx = p * h * w + (oi * stride + di) * w + oj * stride + dj;
            if (in[idx] > in[best]) best = idx;
          }
        }
        argmax[o] = best;
        out[static_cast<Eigen::Index>(o)] = in[best];
      }
    }
  }
  const Tensor* inputs[] = {&x};
  return record_op("maxpool2d", inputs, {x.dim(0), x.dim(1), oh, ow}, std::move(out),
                   [argmax = std::move(argmax)](const Values& up, std::span<Values* const> g) {
                     if (!g[0]) return;
                     for (std::size_t i = 0; i < argmax.size(); ++i) {
                       (*g[0])[static_cast<Eigen::Index>(argmax[i])] += up[static_cast<Eigen::Index>(i)];
                     }
                   });
}

Tensor log_softmax(const Tensor& logits) {
  require_rank("log_softmax", logits, 2);
  require_finite("log_softmax", logits);
  const auto rows = static_cast<Eigen::Index>(logits.dim(0));
  const auto cols = static_cast<Eigen::Index>(logits.dim(1));
  Values out(rows * cols);
  ConstRowMap in(logits.values().data(), rows, cols);
  RowMap res(out.data(), rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Scalar mx = in.row(r).maxCoeff();
    const Scalar lse = mx + std::log((in.row(r).array() - mx).exp().sum());
    res.row(r).array() = in.row(r).array() - lse;
  }
  const Tensor* inputs[] = {&logits};
  Values saved = out;
  return record_op("log_softmax", inputs, logits.shape(), std::move(out),
                   [y = std::move(saved), rows, cols](const Values& up, std::span<Values* const> g) {
                     if (!g[0]) return;
                     ConstRowMap logp(y.data(), rows, cols);
                     ConstRowMap dout(up.data(), rows, cols);
                     RowMap dx(g[0]->data(), rows, cols);
                     for (Eigen::Index r = 0; r < rows; ++r) {
                       dx.row(r).array() += dout.row(r).array() - logp.row(r).array().exp() * dout.row(r).sum();
                     }
                   });
}

Tensor pick(const Tensor& x, std::size_t column) {
  require_rank("pick", x, 2);
  const std::vector<std::size_t> columns(x.dim(0), column);
  return pick(x, columns);
}

Tensor pick(const Tensor& x, std::span<const std::size_t> columns) {
  require_rank("pick", x, 2);
  if (columns.size() != x.dim(0)) shape_mismatch("pick", x.shape(), {columns.size()});
  for (auto c : columns) {
    if (c >= x.dim(1)) shape_mismatch("pick", x.shape(), {c});
  }
  const auto rows = static_cast<Eigen::Index>(x.dim(0));
  const auto cols = static_cast<Eigen::Index>(x.dim(1));
  std::vector<Eigen::Index> flat(columns.size());
  for (Eigen::Index r = 0; r < rows; ++r) flat[r] = r * cols + static_cast<Eigen::Index>(columns[r]);
  Values out(rows);
  for (Eigen::Index r = 0; r < rows; ++r) out[r] = x.values()[flat[r]];
  const Tensor* inputs[] = {&x};
  return record_op("pick", inputs, {x.dim(0)}, std::move(out),
                   [flat = std::move(flat)](const Values& up, std::span<Values* const> g) {
                     if (!g[0]) return;
                     for (std::size_t r = 0; r < flat.size(); ++r) (*g[0])[flat[r]] += up[static_cast<Eigen::Index>(r)];
                   });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack: no tensors given");
  const Shape& part_shape = parts.front().shape();
  const auto part_size = static_cast<Eigen::Index>(parts.front().size());
  std::vector<const Tensor*> inputs;
  inputs.reserve(parts.size());
  Values out(part_size * static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].shape() != part_shape) shape_mismatch("stack", part_shape, parts[i].shape());
    out.segment(static_cast<Eigen::Index>(i) * part_size, part_size) = parts[i].values();
    inputs.push_back(&parts[i]);
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), part_shape.begin(), part_shape.end());
  return record_op("stack", inputs, std::move(shape), std::move(out),
                   [part_size](const Values& up, std::span<Values* const> g) {
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       if (g[i]) *g[i] += up.segment(static_cast<Eigen::Index>(i) * part_size, part_size);
                     }
                   });
}

}  // namespace advpatch
