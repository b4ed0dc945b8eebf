#pragma once

#include <vector>

#include "irib/models/network.hpp"

namespace irib::models {

struct NoiseSchedule {
  std::vector<double> alphas_bar;

  /// alphas_bar linear in t from `first` down to `last`.
  static NoiseSchedule linear(std::size_t steps = 20, double first = 0.9999, double last = 0.05);
  std::size_t size() const { return alphas_bar.size(); }
  /// Checks alphas_bar[0] <= 1, strictly decreasing, last entry > 0.
  void validate() const;
  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;
};

/// z_t = sqrt(a) z + sqrt(1 - a) eps with a = alphas_bar[t].
Var noising(const Var& z, std::size_t t, const Var& eps, const NoiseSchedule& schedule);

/// Sinusoidal embedding of a timestep, [1, dim].
Tensor timestep_embedding(std::size_t t, std::size_t dim);

/// Noise predictor eps(z_t, t) over the image domain: the residual net with a
/// raw output, conditioned on the timestep embedding.
class PriorScore {
 public:
  static NetConfig default_config(std::uint64_t init_seed = 7);

  explicit PriorScore(NetConfig cfg = default_config(), NoiseSchedule schedule = NoiseSchedule::linear());

  const NoiseSchedule& schedule() const { return schedule_; }
  ResidualNet& net() { return net_; }
  const ResidualNet& net() const { return net_; }

  /// Frozen prediction; differentiable w.r.t. z_t.
  Var predict(const Var& z_t, std::size_t t) const;
  /// Prediction with the weights as leaves of `trainable`.
  Var predict(const Var& z_t, std::size_t t, Tape& trainable);

 private:
  void check_t(std::size_t t) const;

  NetConfig cfg_;
  NoiseSchedule schedule_;
  ResidualNet net_;
};

Tensor prior_eps(const PriorScore& prior, const Tensor& z_t, std::size_t t);

}  // namespace irib::models
