#include "adagtcn/tape.hpp"

#include "adagtcn/errors.hpp"

namespace adagtcn {

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) { return leaf(std::move(value), false); }

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    if (in.tape != this) throw Error("op inputs recorded on different tapes");
    if (nodes_[in.id].requires_grad) needs_grad = true;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs_grad;
  if (needs_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buf(Var v) {
  Node& node = nodes_[v.id];
  if (!node.grad_live) {
    node.grad = Tensor(node.value.shape());
    node.grad_live = true;
  }
  return node.grad;
}

const Tensor& Tape::grad(Var v) { return grad_buf(v); }

void Tape::add_to_grad(Var v, const Tensor& contribution) {
  if (!nodes_[v.id].requires_grad) return;
  Tensor& buf = grad_buf(v);
  if (!buf.same_shape(contribution)) {
    throw ShapeError("gradient shape " + contribution.shape_str() +
                     " does not match value shape " + buf.shape_str());
  }
  double* dst = buf.raw();
  const double* src = contribution.raw();
  for (std::size_t i = 0; i < buf.numel(); ++i) dst[i] += src[i];
}

void Tape::backward(Var root) {
  if (root.tape != this) throw Error("backward: root recorded on a different tape");
  if (nodes_[root.id].value.numel() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " +
                     nodes_[root.id].value.shape_str());
  }
  for (Node& node : nodes_) {
    node.grad = Tensor();
    node.grad_live = false;
  }
  grad_buf(root)[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.grad_live || !node.backward) continue;
    node.backward(*this, node.grad);
  }
}

}  // namespace adagtcn
