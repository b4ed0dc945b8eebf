#pragma once

#include <vector>

#include "irib/harness/config.hpp"
#include "irib/numerics/autodiff.hpp"

namespace irib::harness {

/// Heavy-ball gradient descent or Adam, per the config, with
/// global gradient-norm clipping. Reads Parameter::grad, updates
/// Parameter::value.
class Optimizer {
 public:
  Optimizer(std::vector<Parameter>& params, const OptimizerConfig& cfg);

  /// Returns the pre-clipping global gradient norm.
  double step();
  void zero_grad();

 private:
  std::vector<Parameter>& params_;
  OptimizerConfig cfg_;
  std::vector<Tensor> velocity_;
  std::vector<Tensor> second_moment_;
  std::size_t steps_ = 0;
};

}  // namespace irib::harness
