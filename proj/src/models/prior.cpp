#include "irib/models/prior.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "irib/numerics/ops.hpp"

namespace irib::models {

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double first, double last) {
  if (steps < 2) throw std::invalid_argument("NoiseSchedule: need at least two steps");
  NoiseSchedule s;
  for (std::size_t t = 0; t < steps; ++t) {
    s.alphas_bar.push_back(first + (last - first) * static_cast<double>(t) / static_cast<double>(steps - 1));
  }
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (alphas_bar.empty()) throw std::invalid_argument("NoiseSchedule: empty");
  if (alphas_bar.front() > 1.0) throw std::invalid_argument("NoiseSchedule: alphas_bar[0] must be <= 1");
  if (!(alphas_bar.back() > 0.0)) throw std::invalid_argument("NoiseSchedule: last alphas_bar must be > 0");
  for (std::size_t t = 1; t < alphas_bar.size(); ++t) {
    if (!(alphas_bar[t] < alphas_bar[t - 1])) throw std::invalid_argument("NoiseSchedule: must strictly decrease");
  }
}

Var noising(const Var& z, std::size_t t, const Var& eps, const NoiseSchedule& schedule) {
  if (t >= schedule.size()) {
    throw std::out_of_range("noising: t=" + std::to_string(t) + " outside [0, " + std::to_string(schedule.size()) + ")");
  }
  if (z.shape() != eps.shape()) throw ShapeError("noising: eps shape differs from z");
  const double a = schedule.alphas_bar[t];
  return ops::add(ops::scale(z, std::sqrt(a)), ops::scale(eps, std::sqrt(1.0 - a)));
}

Tensor timestep_embedding(std::size_t t, std::size_t dim) {
  Tensor e(Shape{1, dim});
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(100.0, -static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(half, 1)));
    e[i] = std::sin(static_cast<double>(t) * freq);
    e[half + i] = std::cos(static_cast<double>(t) * freq);
  }
  return e;
}

NetConfig PriorScore::default_config(std::uint64_t init_seed) {
  NetConfig c;
  c.blocks = 2;
  c.cond_dim = 16;
  c.residual_output = false;
  c.init_seed = init_seed;
  return c;
}

PriorScore::PriorScore(NetConfig cfg, NoiseSchedule schedule) : cfg_(cfg), schedule_(std::move(schedule)), net_(cfg) {
  schedule_.validate();
  if (cfg.residual_output) throw std::invalid_argument("PriorScore: the noise predictor needs a raw output");
}

void PriorScore::check_t(std::size_t t) const {
  if (t >= schedule_.size()) {
    throw std::out_of_range("prior_eps: t=" + std::to_string(t) + " outside [0, " + std::to_string(schedule_.size()) + ")");
  }
}

Var PriorScore::predict(const Var& z_t, std::size_t t) const {
  check_t(t);
  return net_.forward(z_t, Var::constant(timestep_embedding(t, cfg_.cond_dim)));
}

Var PriorScore::predict(const Var& z_t, std::size_t t, Tape& trainable) {
  check_t(t);
  return net_.forward(z_t, Var::constant(timestep_embedding(t, cfg_.cond_dim)), trainable);
}

Tensor prior_eps(const PriorScore& prior, const Tensor& z_t, std::size_t t) {
  return prior.predict(Var::constant(z_t), t).value();
}

}  // namespace irib::models
