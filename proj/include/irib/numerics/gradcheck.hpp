#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>

#include "irib/numerics/autodiff.hpp"

namespace irib {

class NondeterministicFunctionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a scalar loss on the given tape, binding each Parameter via
/// Tape::leaf. Must be a deterministic function of the parameter values.
using LossFn = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients with central differences on `sample_count`
/// randomly chosen coordinates (all coordinates when there are fewer).
/// Error per coordinate: |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|).
/// Parameter grads are overwritten with the autodiff gradient.
GradCheckResult finite_diff_check(const LossFn& fn, std::span<Parameter* const> params, double step,
                                  std::size_t sample_count, std::uint64_t seed = 0);

}  // namespace irib
