#include "irib/models/network.hpp"

#include <cmath>
#include <stdexcept>

#include "irib/numerics/ops.hpp"
#include "irib/numerics/rng.hpp"

namespace irib::models {
namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, double gain, Rng& rng) {
  Tensor t(std::move(shape));
  const double std = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = std * rng.normal();
  return t;
}

// Hands out the parameters in declaration order, as tape leaves or constants.
struct Bound {
  const std::vector<Parameter>& params;
  std::vector<Parameter>* leaves;
  Tape* tape;
  std::size_t next = 0;
  Var take() {
    const std::size_t i = next++;
    return tape ? tape->leaf((*leaves)[i]) : Var::constant(params[i].value);
  }
};

Var conv_bias(const Var& x, Bound& b) {
  Var w = b.take();
  Var bias = b.take();
  return ops::add_channel_bias(ops::conv2d(x, w, 1, 1), bias);
}

}  // namespace

Condition Condition::null(std::size_t dim) { return Condition{Tensor(Shape{dim}, 0.0), true}; }

Condition Condition::from(Tensor v) {
  if (v.shape().size() != 1) v = v.reshaped({v.size()});
  return Condition{std::move(v), false};
}

Condition condition_dropout(const Condition& c, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("condition_dropout: p must be in [0, 1]");
  Rng rng(seed);
  return rng.bernoulli(p) ? Condition::null(c.dim()) : c;
}

ResidualNet::ResidualNet(NetConfig cfg) : cfg_(cfg) {
  if (cfg.channels == 0 || cfg.width == 0 || cfg.cond_dim == 0) {
    throw std::invalid_argument("ResidualNet: channels, width and cond_dim must be positive");
  }
  Rng rng(cfg.init_seed);
  const std::size_t c = cfg.channels, w = cfg.width, d = cfg.cond_dim;
  auto add = [&](std::string name, Tensor t) { params_.emplace_back(std::move(name), std::move(t)); };
  add("head.w", he_normal({w, c, 3, 3}, c * 9, 1.0, rng));
  add("head.b", Tensor(Shape{w}, 0.0));
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    add(p + "conv1.w", he_normal({w, w, 3, 3}, w * 9, 1.0, rng));
    add(p + "conv1.b", Tensor(Shape{w}, 0.0));
    add(p + "film.gamma.w", he_normal({w, d}, d, 0.5, rng));
    add(p + "film.gamma.b", Tensor(Shape{w}, 0.0));
    add(p + "film.beta.w", he_normal({w, d}, d, 0.5, rng));
    add(p + "film.beta.b", Tensor(Shape{w}, 0.0));
    // Small second conv keeps the residual stack well conditioned at init.
    add(p + "conv2.w", he_normal({w, w, 3, 3}, w * 9, 0.2, rng));
    add(p + "conv2.b", Tensor(Shape{w}, 0.0));
  }
  add("tail.w", Tensor(Shape{c, w, 3, 3}, 0.0));
  add("tail.b", Tensor(Shape{c}, 0.0));
}

std::size_t ResidualNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Parameter& ResidualNet::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw std::out_of_range("ResidualNet: no parameter named " + name);
}

Var ResidualNet::forward(const Var& x, const Var& cond) const { return run(x, cond, nullptr, nullptr); }

Var ResidualNet::forward(const Var& x, const Var& cond, Tape& trainable) {
  return run(x, cond, &params_, &trainable);
}

Var ResidualNet::run(const Var& x, const Var& cond, std::vector<Parameter>* leaves, Tape* tape) const {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[1] != cfg_.channels) {
    throw ShapeError("ResidualNet: expected [N," + std::to_string(cfg_.channels) + ",H,W], got " + shape_to_string(xs));
  }
  if (cond.shape() != Shape{xs[0], cfg_.cond_dim}) {
    throw ShapeError("ResidualNet: condition must be [" + std::to_string(xs[0]) + "," + std::to_string(cfg_.cond_dim) +
                     "], got " + shape_to_string(cond.shape()));
  }
  Bound b{params_, leaves, tape};
  Var h = conv_bias(x, b);
  for (std::size_t i = 0; i < cfg_.blocks; ++i) {
    Var r = conv_bias(h, b);
    Var gw = b.take(), gb = b.take(), bw = b.take(), bb = b.take();
    r = ops::silu(ops::film(r, ops::linear(cond, gw, gb), ops::linear(cond, bw, bb)));
    r = conv_bias(r, b);
    h = ops::add(h, r);
  }
  Var out = conv_bias(ops::silu(h), b);
  return cfg_.residual_output ? ops::clamp(ops::add(x, out), 0.0, 1.0) : out;
}

void ResidualNet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double grad_l1(const std::vector<Parameter>& params) {
  double s = 0.0;
  for (const auto& p : params)
    for (double g : p.grad.data()) s += std::abs(g);
  return s;
}

}  // namespace irib::models
