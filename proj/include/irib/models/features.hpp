#pragma once

#include <cstdint>
#include <vector>

#include "irib/models/network.hpp"

namespace irib::models {

/// Fixed, seeded, never-trained conv stack used as the condition extractor
/// and as the backbone of the perceptual and Frechet proxies.
/// Layers: 3->8 (stride 1), 8->16 (stride 2), 16->32 (stride 2), 3x3 kernels,
/// zero-mean first-layer filters, no biases, SiLU after each.
/// The embedding concatenates the global average pool of every layer; the
/// condition pools the last layer over a 4x4 grid, so it keeps where in the
/// image structure sits, then L2-normalizes.
class FeatureExtractor {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eed'f00d;

  explicit FeatureExtractor(std::uint64_t seed = kDefaultSeed);

  struct Features {
    std::vector<Var> maps;
    Var pooled;  // [N, embed_dim()]
  };

  Features features(const Var& img) const;
  static constexpr std::size_t kConditionGrid = 4;

  /// Unnormalized pooled features [N, embed_dim()].
  Var embed(const Var& img) const { return features(img).pooled; }
  /// L2-normalized grid-pooled last-layer features [N, dim()],
  /// differentiable w.r.t. img. Needs inputs of at least 16x16.
  Var condition(const Var& img) const;

  std::size_t dim() const { return 32 * kConditionGrid * kConditionGrid; }
  std::size_t embed_dim() const { return 56; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Tensor>& weights() const { return weights_; }

 private:
  std::uint64_t seed_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

/// Condition of a single image [1,C,H,W] or [C,H,W].
Condition extract_condition(const FeatureExtractor& y, const Tensor& img);

double cosine(const Tensor& a, const Tensor& b);

}  // namespace irib::models
