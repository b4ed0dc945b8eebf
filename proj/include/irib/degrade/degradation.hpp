#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "irib/numerics/autodiff.hpp"
#include "irib/numerics/rng.hpp"

// Compounded blind degradation: two orders of blur -> resize -> noise -> JPEG,
// sampled from a preset, recorded in a manifest and replayed exactly.
namespace irib::degrade {

enum class ResizeMode { kBilinear, kNearest };

/// Anisotropic generalized Gaussian. tau_x / tau_y are the standard
/// deviations (pixels) along the principal axes, `angle` rotates the first
/// axis counter-clockwise from +x, beta_shape = 1 is a plain Gaussian.
struct BlurStage {
  double tau_x = 1.0;
  double tau_y = 1.0;
  double angle = 0.0;
  double beta_shape = 1.0;
  std::size_t radius = 3;
  friend bool operator==(const BlurStage&, const BlurStage&) = default;
};

struct ResizeStage {
  double scale = 1.0;
  ResizeMode mode = ResizeMode::kBilinear;
  friend bool operator==(const ResizeStage&, const ResizeStage&) = default;
};

/// Additive Gaussian noise drawn from its own seeded stream, independent of
/// the image. `gray` shares one draw across channels.
struct NoiseStage {
  double sigma = 0.0;
  bool gray = false;
  std::uint64_t seed = 0;
  friend bool operator==(const NoiseStage&, const NoiseStage&) = default;
};

struct JpegStage {
  int quality = 95;
  friend bool operator==(const JpegStage&, const JpegStage&) = default;
};

using Stage = std::variant<BlurStage, ResizeStage, NoiseStage, JpegStage>;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool covers(const Range& r) const { return lo <= r.lo && hi >= r.hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Parameter ranges and stage inclusion probabilities for one order.
struct OrderSpec {
  double p_blur = 1.0;
  double p_resize = 1.0;
  double p_noise = 1.0;
  double p_jpeg = 1.0;
  Range tau{0.2, 2.0};
  Range beta_shape{0.5, 4.0};
  Range angle{0.0, 3.141592653589793};
  Range scale{0.5, 1.5};
  Range sigma{0.0, 0.08};
  Range quality{60, 95};
  double p_gray_noise = 0.4;
  double p_nearest = 0.1;
  friend bool operator==(const OrderSpec&, const OrderSpec&) = default;
};

struct DegradationPreset {
  std::string id;
  std::array<OrderSpec, 2> orders;
  double second_order_prob = 0.8;

  /// Default training-regime degradations of the frozen restorer.
  static DegradationPreset lq();
  /// Widened ranges for the extreme regime.
  static DegradationPreset elq();
  /// Samples manifests with no stages.
  static DegradationPreset identity();

  /// Same ranges without nearest-neighbour resizing, for manifests that sit
  /// on a gradient path.
  DegradationPreset differentiable() const;
  /// True when every range of `other` lies inside this preset's range.
  bool covers(const DegradationPreset& other) const;
  void validate() const;

  friend bool operator==(const DegradationPreset&, const DegradationPreset&) = default;
};

struct DegradationManifest {
  std::uint64_t seed = 0;
  std::string preset_id = "identity";
  std::array<std::vector<Stage>, 2> orders;
  /// Product of all resize factors; the output is resized back to the input
  /// extent at the end.
  double final_scale = 1.0;

  bool is_identity() const { return orders[0].empty() && orders[1].empty(); }
  friend bool operator==(const DegradationManifest&, const DegradationManifest&) = default;
};

DegradationManifest sample_manifest(const DegradationPreset& preset, std::uint64_t seed);

/// True when every sampled parameter lies inside the preset's ranges.
bool manifest_within(const DegradationManifest& m, const DegradationPreset& preset);

/// Replays `m` on an NCHW image in [0, 1]. Differentiable w.r.t. `hq` when it
/// is on a tape. Output has the input's shape and is clamped to [0, 1].
Var apply_manifest(const DegradationManifest& m, const Var& hq);
Tensor apply_manifest(const DegradationManifest& m, const Tensor& hq);

/// Normalized kernel [2r+1, 2r+1] with entries exp(-(d2 / 2)^beta), where d2
/// is the squared Mahalanobis radius of (x, y) under the rotated covariance.
Tensor build_blur_kernel(const BlurStage& stage);

/// The exact noise tensor a NoiseStage adds to an image of shape `shape`.
Tensor noise_field(const NoiseStage& stage, const Shape& shape);

/// Differentiable JPEG surrogate: YCbCr, 8x8 block DCT, division by the
/// quality-scaled quantization tables, smooth rounding, inverse. Inputs whose
/// extents are not multiples of 8 are reflect-padded then cropped back. With
/// `quantize` false only the colour and DCT transforms are applied.
Var jpeg_proxy(const Var& img, int quality, bool quantize = true);

/// libjpeg quality scaling of a base quantization table, entries in [1, 255].
std::array<double, 64> scaled_quant_table(const std::array<int, 64>& base, int quality);
const std::array<int, 64>& luma_quant_table();
const std::array<int, 64>& chroma_quant_table();

/// Sharpness of the smooth rounding used by jpeg_proxy.
inline constexpr double kJpegRoundingAlpha = 1.5;

}  // namespace irib::degrade
