#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "advpatch/errors.hpp"

namespace advpatch {

using Scalar = double;
using Shape = std::vector<std::size_t>;
using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
class TapeState;
}

/// Dense row-major tensor of doubles. Values are immutable once created; a
/// tensor produced by an operation on a tracked input carries a node handle
/// into the computation record that produced it.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, Values values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Scalar value);
  static Tensor scalar(Scalar value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return static_cast<std::size_t>(values_->size()); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  const Values& values() const { return *values_; }
  Scalar operator[](std::size_t i) const { return (*values_)[static_cast<Eigen::Index>(i)]; }
  /// Value of a one-element tensor.
  Scalar item() const;

  bool tracked() const { return tape_ != nullptr; }
  std::size_t node() const { return node_; }
  const std::shared_ptr<detail::TapeState>& tape_state() const { return tape_; }

  /// Same values, no longer attached to any record.
  Tensor detach() const;

  /// True when shape and every value match exactly.
  bool identical(const Tensor& other) const;

 private:
  friend class detail::TapeState;

  Shape shape_;
  std::shared_ptr<const Values> values_;
  std::shared_ptr<detail::TapeState> tape_;
  std::size_t node_ = 0;
};

/// Backward rule of one recorded operation. `upstream` is d(loss)/d(output);
/// `input_grads[i]` accumulates d(loss)/d(input i) and is null for inputs that
/// are not tracked.
using BackwardFn = std::function<void(const Values& upstream, std::span<Values* const> input_grads)>;

/// Gradients of a scalar loss, keyed by the node of each tensor.
class Gradient {
 public:
  /// Gradient with respect to `t`, zeros when the loss does not depend on it.
  Tensor wrt(const Tensor& t) const;

 private:
  friend class Tape;
  std::shared_ptr<const detail::TapeState> state_;
  std::vector<Values> grads_;
};

/// A computation record. Operations on tensors derived from `variable()`
/// leaves append to it; `backward` consumes it exactly once.
class Tape {
 public:
  Tape();

  /// Registers `value` as a differentiable leaf.
  Tensor variable(const Tensor& value);

  Gradient backward(const Tensor& loss);

  bool consumed() const;
  std::size_t operation_count() const;

 private:
  std::shared_ptr<detail::TapeState> state_;
};

inline Gradient backward(const Tensor& loss, Tape& record) { return record.backward(loss); }

/// Builds the result of an operation. When any input is tracked the result is
/// appended to their shared record with `backward_fn`; otherwise the result is
/// a constant and `backward_fn` is dropped.
Tensor record_op(const char* op_name, std::span<const Tensor* const> inputs, Shape out_shape, Values out_values,
                 BackwardFn backward_fn);

void require_finite(const char* op_name, const Tensor& t);

}  // namespace advpatch
