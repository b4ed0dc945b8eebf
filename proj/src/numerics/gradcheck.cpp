#include "irib/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "irib/numerics/rng.hpp"

namespace irib {
namespace {

double evaluate(const LossFn& fn) {
  Tape tape;
  return fn(tape).value().item();
}

}  // namespace

GradCheckResult finite_diff_check(const LossFn& fn, std::span<Parameter* const> params, double step,
                                  std::size_t sample_count, std::uint64_t seed) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = fn(tape);
    backward(loss);
  }
  const double base1 = evaluate(fn);
  const double base2 = evaluate(fn);
  if (base1 != base2) throw NondeterministicFunctionError("finite_diff_check: loss differs between two evaluations");

  // Flat coordinate index -> (parameter, element).
  std::vector<std::size_t> offsets{0};
  for (Parameter* p : params) offsets.push_back(offsets.back() + p->value.size());
  const std::size_t total = offsets.back();
  std::vector<std::size_t> coords(total);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (sample_count < total) {
    Rng rng(seed);
    for (std::size_t i = 0; i < sample_count; ++i) {
      auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(total - 1)));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(sample_count);
  }

  GradCheckResult result;
  for (std::size_t flat : coords) {
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat) - 1;
    Parameter& p = *params[static_cast<std::size_t>(it - offsets.begin())];
    const std::size_t e = flat - *it;
    const double orig = p.value[e];
    p.value[e] = orig + step;
    const double fp = evaluate(fn);
    p.value[e] = orig - step;
    const double fm = evaluate(fn);
    p.value[e] = orig;
    const double g_fd = (fp - fm) / (2.0 * step);
    const double g_ad = p.grad[e];
    const double err = std::abs(g_ad - g_fd) / std::max(1e-12, std::abs(g_ad) + std::abs(g_fd));
    result.max_rel_error = std::max(result.max_rel_error, err);
    ++result.coordinates;
  }
  return result;
}

}  // namespace irib
