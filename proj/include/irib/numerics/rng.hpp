#pragma once

#include <cstdint>
#include <random>

namespace irib {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for item `index` of a run: stable across platforms.
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t a, std::uint64_t b);

/// Portable random stream. The engine (mt19937_64) is fully specified by the
/// standard; the distributions are implemented here because the standard
/// library's are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller; one draw per call.
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace irib
