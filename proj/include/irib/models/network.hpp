#pragma once

#include <cstdint>
#include <vector>

#include "irib/numerics/autodiff.hpp"

namespace irib::models {

struct NetConfig {
  std::size_t channels = 3;
  std::size_t width = 16;
  std::size_t blocks = 4;
  std::size_t cond_dim = 512;
  /// true: output = clamp(x + tail, 0, 1); false: output = tail (raw).
  bool residual_output = true;
  std::uint64_t init_seed = 1;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// A conditioning vector. A null condition is the all-zeros vector.
struct Condition {
  Tensor vector;
  bool is_null = false;

  static Condition null(std::size_t dim);
  static Condition from(Tensor v);
  /// As a [1, D] constant.
  Var as_var() const { return Var::constant(vector.reshaped({1, vector.size()})); }
  std::size_t dim() const { return vector.size(); }
};

/// Returns the null condition with probability p, otherwise `c`. Draws one
/// uniform from a stream seeded by `seed`.
Condition condition_dropout(const Condition& c, double p, std::uint64_t seed);

/// Residual conv net: 3x3 head conv, `blocks` residual blocks
/// (conv, feature-wise affine from the condition, SiLU, conv), SiLU and a
/// zero-initialized 3x3 tail conv. With residual_output the untrained net is
/// the identity on [0, 1] images.
class ResidualNet {
 public:
  explicit ResidualNet(NetConfig cfg);

  const NetConfig& config() const { return cfg_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  Parameter& parameter(const std::string& name);

  /// x [N,C,H,W], cond [N,cond_dim]. Frozen weights: they enter as
  /// constants, gradients still flow into x and cond.
  Var forward(const Var& x, const Var& cond) const;
  /// Weights become leaves of `trainable`.
  Var forward(const Var& x, const Var& cond, Tape& trainable);

  void zero_grad();

 private:
  Var run(const Var& x, const Var& cond, std::vector<Parameter>* leaves, Tape* tape) const;

  NetConfig cfg_;
  std::vector<Parameter> params_;
};

/// Sum of |grad| over all parameters.
double grad_l1(const std::vector<Parameter>& params);

}  // namespace irib::models
