#include "advpatch/tensor.hpp"

#include <cmath>
#include <sstream>

namespace advpatch {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

class TapeState {
 public:
  struct Op {
    std::vector<std::ptrdiff_t> inputs;  // -1 for untracked inputs
    std::size_t output;
    BackwardFn backward;
  };

  std::size_t add_node(const Shape& shape) {
    if (consumed) throw StateError("computation record already consumed by backward()");
    node_shapes.push_back(shape);
    return node_shapes.size() - 1;
  }

  static Tensor attach(Tensor t, std::shared_ptr<TapeState> state, std::size_t node) {
    t.tape_ = std::move(state);
    t.node_ = node;
    return t;
  }

  std::vector<Shape> node_shapes;
  std::vector<Op> ops;
  bool consumed = false;
};

}  // namespace detail

Tensor::Tensor() : shape_{}, values_(std::make_shared<const Values>(Values::Zero(1))) {}

Tensor::Tensor(Shape shape, Values values) : shape_(std::move(shape)) {
  if (static_cast<std::size_t>(values.size()) != numel(shape_)) {
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " + to_string(shape_));
  }
  values_ = std::make_shared<const Values>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = static_cast<Eigen::Index>(numel(shape));
  return Tensor(std::move(shape), Values::Zero(n));
}

Tensor Tensor::full(Shape shape, Scalar value) {
  const auto n = static_cast<Eigen::Index>(numel(shape));
  return Tensor(std::move(shape), Values::Constant(n, value));
}

Tensor Tensor::scalar(Scalar value) { return Tensor({}, Values::Constant(1, value)); }

Scalar Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
  return (*values_)[0];
}

Tensor Tensor::detach() const {
  Tensor t;
  t.shape_ = shape_;
  t.values_ = values_;
  return t;
}

bool Tensor::identical(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  for (Eigen::Index i = 0; i < values_->size(); ++i) {
    if ((*values_)[i] != other.values()[i]) return false;
  }
  return true;
}

Tensor Gradient::wrt(const Tensor& t) const {
  if (!t.tracked() || t.tape_state() != state_) {
    throw StateError("gradient requested for a tensor that is not part of this record");
  }
  const auto& g = grads_[t.node()];
  if (g.size() == 0) return Tensor::zeros(t.shape());
  return Tensor(t.shape(), g);
}

Tape::Tape() : state_(std::make_shared<detail::TapeState>()) {}

Tensor Tape::variable(const Tensor& value) {
  const auto node = state_->add_node(value.shape());
  return detail::TapeState::attach(value.detach(), state_, node);
}

bool Tape::consumed() const { return state_->consumed; }

std::size_t Tape::operation_count() const { return state_->ops.size(); }

Gradient Tape::backward(const Tensor& loss) {
  if (state_->consumed) throw StateError("backward: computation record already consumed");
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
  if (!loss.tracked() || loss.tape_state() != state_) {
    throw StateError("backward: loss does not belong to this computation record");
  }
  state_->consumed = true;

  std::vector<Values> grads(state_->node_shapes.size());
  grads[loss.node()] = Values::Ones(1);

  std::vector<Values*> input_ptrs;
  for (auto op = state_->ops.rbegin(); op != state_->ops.rend(); ++op) {
    const Values& upstream = grads[op->output];
    if (upstream.size() == 0) continue;
    input_ptrs.assign(op->inputs.size(), nullptr);
    for (std::size_t i = 0; i < op->inputs.size(); ++i) {
      if (op->inputs[i] < 0) continue;
      auto& g = grads[static_cast<std::size_t>(op->inputs[i])];
      if (g.size() == 0) g = Values::Zero(static_cast<Eigen::Index>(numel(state_->node_shapes[op->inputs[i]])));
      input_ptrs[i] = &g;
    }
    op->backward(upstream, input_ptrs);
    // Captured forward context is no longer needed.
    op->backward = nullptr;
  }

  Gradient result;
  result.state_ = state_;
  result.grads_ = std::move(grads);
  return result;
}

Tensor record_op(const char* op_name, std::span<const Tensor* const> inputs, Shape out_shape, Values out_values,
                 BackwardFn backward_fn) {
  Tensor out(std::move(out_shape), std::move(out_values));

  std::shared_ptr<detail::TapeState> state;
  for (const Tensor* in : inputs) {
    if (!in->tracked()) continue;
    if (state && state != in->tape_state()) {
      throw StateError(std::string(op_name) + ": operands belong to different computation records");
    }
    state = in->tape_state();
  }
  if (!state) return out;

  detail::TapeState::Op op;
  op.inputs.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    op.inputs.push_back(in->tracked() ? static_cast<std::ptrdiff_t>(in->node()) : -1);
  }
  op.output = state->add_node(out.shape());
  op.backward = std::move(backward_fn);
  state->ops.push_back(std::move(op));
  return detail::TapeState::attach(std::move(out), state, state->ops.back().output);
}

void require_finite(const char* op_name, const Tensor& t) {
  if (!t.values().isFinite().all()) {
    throw NumericsError(std::string(op_name) + ": non-finite input of shape " + to_string(t.shape()));
  }
}

}  // namespace advpatch
