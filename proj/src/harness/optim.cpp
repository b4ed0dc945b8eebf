#include "irib/harness/optim.hpp"

#include <cmath>

namespace irib::harness {

Optimizer::Optimizer(std::vector<Parameter>& params, const OptimizerConfig& cfg) : params_(params), cfg_(cfg) {
  for (const auto& p : params_) {
    velocity_.emplace_back(p.value.shape(), 0.0);
    if (cfg_.algorithm == "adam") second_moment_.emplace_back(p.value.shape(), 0.0);
  }
}

double Optimizer::step() {
  double sq = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  const double scale = norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;
  ++steps_;
  const bool adam = !second_moment_.empty();
  const double c1 = 1.0 - std::pow(cfg_.momentum, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto v = velocity_[i].data();
    auto w = params_[i].value.data();
    auto g = params_[i].grad.data();
    if (!adam) {
      for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = cfg_.momentum * v[k] + scale * g[k];
        w[k] -= cfg_.learning_rate * v[k];
      }
      continue;
    }
    auto s = second_moment_[i].data();
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double gk = scale * g[k];
      v[k] = cfg_.momentum * v[k] + (1.0 - cfg_.momentum) * gk;
      s[k] = cfg_.beta2 * s[k] + (1.0 - cfg_.beta2) * gk * gk;
      w[k] -= cfg_.learning_rate * (v[k] / c1) / (std::sqrt(s[k] / c2) + 1e-8);
    }
  }
  return norm;
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace irib::harness
