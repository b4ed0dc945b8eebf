#include "irib/models/features.hpp"

#include <cmath>
#include <stdexcept>

#include "irib/numerics/ops.hpp"
#include "irib/numerics/rng.hpp"

namespace irib::models {
namespace {

constexpr std::size_t kChannels[] = {3, 8, 16, 32};
constexpr std::size_t kStrides[] = {1, 2, 2};
// Image gradients are small; a large first-layer gain puts SiLU in its
// rectifying range so pooled features measure local contrast.
constexpr double kFirstGain = 4;

}  // namespace

FeatureExtractor::FeatureExtractor(std::uint64_t seed) : seed_(seed) {
  Rng rng(seed);
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t in = kChannels[l], out = kChannels[l + 1];
    Tensor w(Shape{out, in, 3, 3});
    const double std = (l == 0 ? kFirstGain : 1.0) * std::sqrt(2.0 / static_cast<double>(in * 9));
    for (auto& v : w.data()) v = std * rng.normal();
    if (l == 0) {
      // Zero-mean first-layer filters: flat regions map to zero features.
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) {
          double mean = 0.0;
          for (std::size_t k = 0; k < 9; ++k) mean += w[(o * in + i) * 9 + k] / 9.0;
          for (std::size_t k = 0; k < 9; ++k) w[(o * in + i) * 9 + k] -= mean;
        }
    }
    Tensor b(Shape{out}, 0.0);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
}

FeatureExtractor::Features FeatureExtractor::features(const Var& img) const {
  if (img.shape().size() != 4 || img.shape()[1] != 3) {
    throw ShapeError("FeatureExtractor: expected [N,3,H,W], got " + shape_to_string(img.shape()));
  }
  Features f;
  Var h = img;
  for (std::size_t l = 0; l < 3; ++l) {
    h = ops::conv2d(h, Var::constant(weights_[l]), kStrides[l], 1);
    h = ops::silu(ops::add_channel_bias(h, Var::constant(biases_[l])));
    f.maps.push_back(h);
  }
  f.pooled = ops::concat_cols(ops::concat_cols(ops::global_avg_pool(f.maps[0]), ops::global_avg_pool(f.maps[1])),
                              ops::global_avg_pool(f.maps[2]));
  return f;
}

Var FeatureExtractor::condition(const Var& img) const {
  return ops::l2_normalize_rows(ops::grid_avg_pool(features(img).maps.back(), kConditionGrid));
}

Condition extract_condition(const FeatureExtractor& y, const Tensor& img) {
  Tensor x = img.shape().size() == 3 ? img.reshaped({1, img.shape()[0], img.shape()[1], img.shape()[2]}) : img;
  if (x.shape()[0] != 1) throw ShapeError("extract_condition: expects a single image, got " + shape_to_string(x.shape()));
  return Condition::from(y.condition(Var::constant(std::move(x))).value());
}

double cosine(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: size mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(std::max(aa * bb, 1e-300));
}

}  // namespace irib::models
