#pragma once

#include <functional>
#include <vector>

#include "adagtcn/tensor.hpp"

namespace adagtcn {

class Tape;

/// Handle to a tensor recorded on a Tape. Cheap to copy; the tape owns the
/// values and gradient buffers. Constants carry requires_grad = false and
/// never receive gradients.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Tensor& grad() const;
};

/// Records a forward computation and replays it in reverse for gradients.
/// Nodes are stored in construction order, which is a valid topological
/// order because every op's inputs must already exist on the tape.
/// A Tape is single-threaded; independent tapes may run concurrently.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A differentiable input (parameter or checked input).
  Var leaf(Tensor value, bool requires_grad = true);

  /// Non-differentiable value.
  Var constant(Tensor value);

  /// Records an op result. `fn` receives this node's accumulated gradient and
  /// must scatter contributions into the inputs' buffers via add_to_grad().
  /// Pass requires-grad inputs so constant-only subgraphs skip backward work.
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }

  /// Gradient of the last backward() root w.r.t. this node. Zero-shaped
  /// buffer if the node never received a contribution.
  const Tensor& grad(Var v);

  void add_to_grad(Var v, const Tensor& contribution);
  /// Raw accumulator access for op kernels that scatter elementwise.
  Tensor& grad_buf(Var v);

  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Reverse pass from a scalar root. Clears previous gradients first.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool grad_live = false;
  };

  std::vector<Node> nodes_;
};

}  // namespace adagtcn
