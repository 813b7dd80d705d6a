#pragma once

#include <cstddef>
#include <span>

#include "advpatch/tensor.hpp"

namespace advpatch {

// Elementwise binary ops accept equal shapes, or one operand whose shape equals
// the other's shape without its leading (batch) extent.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, Scalar factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// [M x K] * [K x N] -> [M x N]
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation of x [B x C x H x W] with kernels [F x C x Kh x Kw],
/// zero padding `pad` on every side.
Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride, std::size_t pad);

/// Adds bias[f] to every spatial position of channel f of x [B x F x H x W].
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Max over window x window regions of x [B x C x H x W]. Ties go to the first
/// maximum in row-major scan order.
Tensor maxpool2d(const Tensor& x, std::size_t window, std::size_t stride);

/// Row-wise log-softmax of logits [B x K].
Tensor log_softmax(const Tensor& logits);

/// out[b] = x[b, column] for x [B x K].
Tensor pick(const Tensor& x, std::size_t column);
/// out[b] = x[b, columns[b]] for x [B x K].
Tensor pick(const Tensor& x, std::span<const std::size_t> columns);

/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);

}  // namespace advpatch
