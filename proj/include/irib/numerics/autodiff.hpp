#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "irib/numerics/tensor.hpp"

namespace irib {

/// A trainable tensor with a gradient accumulator of identical shape.
struct Parameter {
  Parameter(std::string name, Tensor value);

  void zero_grad();

  std::string name;
  Tensor value;
  Tensor grad;
};

class Tape;

/// Handle to a value flowing through a computation. A Var without a tape is
/// a constant; gradients are only tracked for Vars recorded on a Tape.
class Var {
 public:
  Var() = default;
  static Var constant(Tensor t);

  const Tensor& value() const { return *value_; }
  const Shape& shape() const { return value_->shape(); }
  bool requires_grad() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  std::shared_ptr<const Tensor> value_ = std::make_shared<const Tensor>();
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run gradient tape. Nodes are appended in execution order and the
/// backward pass walks them in exact reverse order. Single-threaded.
class Tape {
 public:
  /// Receives the node's output gradient; adds contributions into its inputs'
  /// buffers via Tape::grad_buffer.
  using BackwardFn = std::function<void(std::span<const double> grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `p` as a leaf; its gradient is written back by
  /// accumulate_into_parameters().
  Var leaf(Parameter& p);
  /// A differentiable input that is not a Parameter.
  Var variable(Tensor t);
  Var record(Tensor value, BackwardFn backward);

  std::span<double> grad_buffer(const Var& v);

  /// Reverse sweep from a rank-0 loss.
  void propagate(const Var& loss);
  /// Adds leaf gradients into the registered Parameters' grad tensors.
  void accumulate_into_parameters(double scale = 1.0) const;
  /// Gradient of the last propagated loss w.r.t. `v` (zeros if unreached).
  Tensor grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::shared_ptr<const Tensor> value;
    std::vector<double> grad;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  Var push(Node node);

  std::vector<Node> nodes_;
};

/// propagate + accumulate_into_parameters in one call.
void backward(const Var& loss);

/// The tape shared by the differentiable operands, or nullptr when all are
/// constants. Throws if operands live on different tapes.
Tape* common_tape(std::initializer_list<const Var*> vars);

}  // namespace irib
