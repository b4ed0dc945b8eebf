#include "irib/numerics/autodiff.hpp"

#include <stdexcept>

namespace irib {

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

void Parameter::zero_grad() { grad = Tensor(value.shape()); }

Var Var::constant(Tensor t) {
  Var v;
  v.value_ = std::make_shared<const Tensor>(std::move(t));
  return v;
}

Var Tape::push(Node node) {
  Var v;
  v.value_ = node.value;
  v.tape_ = this;
  v.id_ = nodes_.size();
  nodes_.push_back(std::move(node));
  return v;
}

Var Tape::leaf(Parameter& p) {
  Node n;
  n.value = std::make_shared<const Tensor>(p.value);
  n.param = &p;
  return push(std::move(n));
}

Var Tape::variable(Tensor t) {
  Node n;
  n.value = std::make_shared<const Tensor>(std::move(t));
  return push(std::move(n));
}

Var Tape::record(Tensor value, BackwardFn backward) {
  Node n;
  n.value = std::make_shared<const Tensor>(std::move(value));
  n.backward = std::move(backward);
  return push(std::move(n));
}

std::span<double> Tape::grad_buffer(const Var& v) {
  if (v.tape_ != this) throw std::logic_error("grad_buffer: variable belongs to another tape");
  Node& n = nodes_[v.id_];
  if (n.grad.empty()) n.grad.assign(n.value->size(), 0.0);
  return n.grad;
}

void Tape::propagate(const Var& loss) {
  if (loss.tape_ != this) throw std::invalid_argument("backward: loss was not recorded on this tape");
  if (!loss.shape().empty()) {
    throw ShapeError("backward needs a rank-0 loss, got " + shape_to_string(loss.shape()));
  }
  for (auto& n : nodes_) n.grad.clear();
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n.grad, *this);
  }
}

void Tape::accumulate_into_parameters(double scale) const {
  for (const auto& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto g = n.param->grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * n.grad[i];
  }
}

Tensor Tape::grad(const Var& v) const {
  if (v.tape_ != this) throw std::invalid_argument("grad: variable belongs to another tape");
  const Node& n = nodes_[v.id_];
  if (n.grad.empty()) return Tensor(n.value->shape());
  return Tensor(n.value->shape(), n.grad);
}

void backward(const Var& loss) {
  if (!loss.tape()) throw std::invalid_argument("backward: loss is a constant");
  loss.tape()->propagate(loss);
  loss.tape()->accumulate_into_parameters();
}

Tape* common_tape(std::initializer_list<const Var*> vars) {
  Tape* tape = nullptr;
  for (const Var* v : vars) {
    if (!v->tape()) continue;
    if (tape && tape != v->tape()) throw std::invalid_argument("operands recorded on different tapes");
    tape = v->tape();
  }
  return tape;
}

}  // namespace irib
