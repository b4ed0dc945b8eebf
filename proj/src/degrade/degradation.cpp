#include "irib/degrade/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "irib/numerics/ops.hpp"

namespace irib::degrade {
namespace {

OrderSpec lq_order() { return OrderSpec{}; }

OrderSpec elq_order() {
  OrderSpec o;
  o.tau = {0.2, 4.0};
  o.scale = {0.25, 1.5};
  o.sigma = {0.0, 0.2};
  o.quality = {20, 95};
  return o;
}

double sample(Rng& rng, const Range& r) { return rng.uniform(r.lo, r.hi); }

std::vector<Stage> sample_order(const OrderSpec& spec, Rng& rng) {
  std::vector<Stage> stages;
  if (rng.bernoulli(spec.p_blur)) {
    BlurStage b;
    b.tau_x = sample(rng, spec.tau);
    b.tau_y = sample(rng, spec.tau);
    b.angle = sample(rng, spec.angle);
    b.beta_shape = sample(rng, spec.beta_shape);
    b.radius = static_cast<std::size_t>(std::max(1.0, std::ceil(3.0 * std::max(b.tau_x, b.tau_y))));
    stages.emplace_back(b);
  }
  const bool resize = rng.bernoulli(spec.p_resize);
  const bool noise = rng.bernoulli(spec.p_noise);
  const bool jpeg = rng.bernoulli(spec.p_jpeg);
  const bool any_enabled = spec.p_blur > 0 || spec.p_resize > 0 || spec.p_noise > 0 || spec.p_jpeg > 0;
  if (resize || (stages.empty() && !noise && !jpeg && any_enabled)) {
    ResizeStage r;
    r.scale = sample(rng, spec.scale);
    r.mode = rng.bernoulli(spec.p_nearest) ? ResizeMode::kNearest : ResizeMode::kBilinear;
    stages.emplace_back(r);
  }
  if (noise) {
    NoiseStage n;
    n.sigma = sample(rng, spec.sigma);
    n.gray = rng.bernoulli(spec.p_gray_noise);
    n.seed = rng.next_u64();
    stages.emplace_back(n);
  }
  if (jpeg) {
    JpegStage j;
    j.quality = static_cast<int>(rng.uniform_int(static_cast<std::int64_t>(spec.quality.lo),
                                                 static_cast<std::int64_t>(spec.quality.hi)));
    stages.emplace_back(j);
  }
  return stages;
}

std::size_t scaled_extent(std::size_t n, double scale) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale));
}

bool order_within(const std::vector<Stage>& stages, const OrderSpec& spec) {
  for (const auto& s : stages) {
    if (const auto* b = std::get_if<BlurStage>(&s)) {
      if (!spec.tau.contains(b->tau_x) || !spec.tau.contains(b->tau_y) || !spec.angle.contains(b->angle) ||
          !spec.beta_shape.contains(b->beta_shape)) {
        return false;
      }
    } else if (const auto* r = std::get_if<ResizeStage>(&s)) {
      if (!spec.scale.contains(r->scale)) return false;
      if (r->mode == ResizeMode::kNearest && spec.p_nearest <= 0.0) return false;
    } else if (const auto* n = std::get_if<NoiseStage>(&s)) {
      if (!spec.sigma.contains(n->sigma)) return false;
    } else if (const auto* j = std::get_if<JpegStage>(&s)) {
      if (!spec.quality.contains(j->quality)) return false;
    }
  }
  return true;
}

// RGB -> YCbCr (JFIF, full range) in 0..255 units.
constexpr double kRgbToYcc[9] = {0.299,     0.587,     0.114,  //
                                 -0.168736, -0.331264, 0.5,    //
                                 0.5,       -0.418688, -0.081312};

std::array<double, 9> invert3(const double* m) {
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  return {(m[4] * m[8] - m[5] * m[7]) / det, (m[2] * m[7] - m[1] * m[8]) / det, (m[1] * m[5] - m[2] * m[4]) / det,
          (m[5] * m[6] - m[3] * m[8]) / det, (m[0] * m[8] - m[2] * m[6]) / det, (m[2] * m[3] - m[0] * m[5]) / det,
          (m[3] * m[7] - m[4] * m[6]) / det, (m[1] * m[6] - m[0] * m[7]) / det, (m[0] * m[4] - m[1] * m[3]) / det};
}

// Per-pixel divisor tensor tiling the 8x8 tables over every block.
Tensor tiled_tables(const Shape& s, int quality) {
  const auto luma = scaled_quant_table(luma_quant_table(), quality);
  const auto chroma = scaled_quant_table(chroma_quant_table(), quality);
  Tensor t(s);
  for (std::size_t n = 0; n < s[0]; ++n)
    for (std::size_t c = 0; c < s[1]; ++c) {
      const auto& q = c == 0 ? luma : chroma;
      for (std::size_t y = 0; y < s[2]; ++y)
        for (std::size_t x = 0; x < s[3]; ++x) t.at(n, c, y, x) = q[(y % 8) * 8 + x % 8];
    }
  return t;
}

}  // namespace

DegradationPreset DegradationPreset::lq() {
  DegradationPreset p;
  p.id = "lq";
  p.orders = {lq_order(), lq_order()};
  p.orders[1].p_blur = 0.8;
  p.second_order_prob = 0.8;
  return p;
}

DegradationPreset DegradationPreset::elq() {
  DegradationPreset p;
  p.id = "elq";
  p.orders = {elq_order(), elq_order()};
  p.orders[1].p_blur = 0.8;
  p.second_order_prob = 1.0;
  return p;
}

DegradationPreset DegradationPreset::identity() {
  DegradationPreset p;
  p.id = "identity";
  for (auto& o : p.orders) o.p_blur = o.p_resize = o.p_noise = o.p_jpeg = 0.0;
  p.second_order_prob = 0.0;
  return p;
}

DegradationPreset DegradationPreset::differentiable() const {
  DegradationPreset p = *this;
  for (auto& o : p.orders) o.p_nearest = 0.0;
  return p;
}

bool DegradationPreset::covers(const DegradationPreset& other) const {
  for (std::size_t k = 0; k < 2; ++k) {
    const OrderSpec& a = orders[k];
    const OrderSpec& b = other.orders[k];
    if (!a.tau.covers(b.tau) || !a.beta_shape.covers(b.beta_shape) || !a.angle.covers(b.angle) ||
        !a.scale.covers(b.scale) || !a.sigma.covers(b.sigma) || !a.quality.covers(b.quality)) {
      return false;
    }
  }
  return true;
}

void DegradationPreset::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(second_order_prob)) throw std::invalid_argument("preset " + id + ": second_order_prob outside [0,1]");
  for (const auto& o : orders) {
    for (double p : {o.p_blur, o.p_resize, o.p_noise, o.p_jpeg, o.p_gray_noise, o.p_nearest}) {
      if (!prob(p)) throw std::invalid_argument("preset " + id + ": probability outside [0,1]");
    }
    for (const Range& r : {o.tau, o.beta_shape, o.angle, o.scale, o.sigma, o.quality}) {
      if (!(r.lo <= r.hi)) throw std::invalid_argument("preset " + id + ": empty range");
    }
    if (o.tau.lo <= 0.0 || o.beta_shape.lo <= 0.0 || o.scale.lo <= 0.0 || o.sigma.lo < 0.0 || o.sigma.hi > 1.0 ||
        o.quality.lo < 1 || o.quality.hi > 100) {
      throw std::invalid_argument("preset " + id + ": range outside the valid parameter domain");
    }
  }
}

DegradationManifest sample_manifest(const DegradationPreset& preset, std::uint64_t seed) {
  DegradationManifest m;
  m.seed = seed;
  m.preset_id = preset.id;
  Rng rng(seed);
  m.orders[0] = sample_order(preset.orders[0], rng);
  if (rng.bernoulli(preset.second_order_prob)) m.orders[1] = sample_order(preset.orders[1], rng);
  for (const auto& order : m.orders)
    for (const auto& s : order)
      if (const auto* r = std::get_if<ResizeStage>(&s)) m.final_scale *= r->scale;
  return m;
}

bool manifest_within(const DegradationManifest& m, const DegradationPreset& preset) {
  return order_within(m.orders[0], preset.orders[0]) && order_within(m.orders[1], preset.orders[1]);
}

Tensor build_blur_kernel(const BlurStage& st) {
  if (!(st.tau_x > 0.0) || !(st.tau_y > 0.0) || !(st.beta_shape > 0.0)) {
    throw std::invalid_argument("build_blur_kernel: tau_x, tau_y and beta_shape must be positive");
  }
  if (st.radius == 0) throw std::invalid_argument("build_blur_kernel: radius must be positive");
  // Inverse covariance of R diag(tau_x^2, tau_y^2) R^T.
  const double c = std::cos(st.angle), s = std::sin(st.angle);
  const double ix = 1.0 / (st.tau_x * st.tau_x), iy = 1.0 / (st.tau_y * st.tau_y);
  const double a = c * c * ix + s * s * iy;
  const double b = c * s * (ix - iy);
  const double d = s * s * ix + c * c * iy;
  const std::size_t k = 2 * st.radius + 1;
  const auto r = static_cast<std::ptrdiff_t>(st.radius);
  Tensor out(Shape{k, k});
  double total = 0.0;
  for (std::ptrdiff_t y = -r; y <= r; ++y)
    for (std::ptrdiff_t x = -r; x <= r; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      const double d2 = a * fx * fx + 2.0 * b * fx * fy + d * fy * fy;
      const double v = std::exp(-std::pow(0.5 * d2, st.beta_shape));
      out[static_cast<std::size_t>((y + r) * static_cast<std::ptrdiff_t>(k) + (x + r))] = v;
      total += v;
    }
  for (auto& v : out.data()) v /= total;
  return out;
}

Tensor noise_field(const NoiseStage& stage, const Shape& shape) {
  Tensor t(shape);
  Rng rng(stage.seed);
  if (!stage.gray) {
    for (auto& v : t.data()) v = stage.sigma * rng.normal();
    return t;
  }
  const std::size_t plane = shape[2] * shape[3];
  for (std::size_t n = 0; n < shape[0]; ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = stage.sigma * rng.normal();
      for (std::size_t c = 0; c < shape[1]; ++c) t[(n * shape[1] + c) * plane + i] = v;
    }
  return t;
}

const std::array<int, 64>& luma_quant_table() {
  static const std::array<int, 64> t = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                        14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                        18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                        49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  return t;
}

const std::array<int, 64>& chroma_quant_table() {
  static const std::array<int, 64> t = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                        24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                        99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                        99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  return t;
}

std::array<double, 64> scaled_quant_table(const std::array<int, 64>& base, int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("JPEG quality must be in 1..100");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> out{};
  for (std::size_t i = 0; i < 64; ++i) out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return out;
}

Var jpeg_proxy(const Var& img, int quality, bool quantize) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg_proxy: quality must be in 1..100");
  if (img.shape().size() != 4) throw ShapeError("jpeg_proxy: expected NCHW, got " + shape_to_string(img.shape()));
  const Shape s = img.shape();
  const std::size_t ch = s[1];
  if (ch != 1 && ch != 3) throw ShapeError("jpeg_proxy: needs 1 or 3 channels, got " + shape_to_string(s));
  const std::size_t ph = (8 - s[2] % 8) % 8, pw = (8 - s[3] % 8) % 8;
  Var x = (ph || pw) ? ops::pad_reflect(img, 0, ph, 0, pw) : img;

  // Colour transform as a 1x1 convolution in 0..255 units, level-shifted.
  Tensor fwd(Shape{ch, ch, 1, 1}), inv(Shape{ch, ch, 1, 1}), shift(Shape{ch}), unshift(Shape{ch});
  if (ch == 3) {
    const auto minv = invert3(kRgbToYcc);
    for (std::size_t i = 0; i < 9; ++i) {
      fwd[i] = 255.0 * kRgbToYcc[i];
      inv[i] = minv[i] / 255.0;
    }
    shift[0] = -128.0;
    for (std::size_t i = 0; i < 3; ++i) unshift[i] = minv[i * 3] * 128.0 / 255.0;
  } else {
    fwd[0] = 255.0;
    inv[0] = 1.0 / 255.0;
    shift[0] = -128.0;
    unshift[0] = 128.0 / 255.0;
  }
  Var ycc = ops::add_channel_bias(ops::conv2d(x, Var::constant(fwd)), Var::constant(shift));
  Var coef = ops::block_dct8(ycc);
  if (quantize) {
    const Tensor q = tiled_tables(coef.shape(), quality);
    Tensor q_inv = q;
    for (auto& v : q_inv.data()) v = 1.0 / v;
    coef = ops::mul(ops::soft_round(ops::mul(coef, Var::constant(q_inv)), kJpegRoundingAlpha), Var::constant(q));
  }
  Var back = ops::block_dct8(coef, true);
  Var rgb = ops::add_channel_bias(ops::conv2d(back, Var::constant(inv)), Var::constant(unshift));
  return (ph || pw) ? ops::crop(rgb, 0, 0, s[2], s[3]) : rgb;
}

Var apply_manifest(const DegradationManifest& m, const Var& hq) {
  if (hq.shape().size() != 4) throw ShapeError("apply_manifest: expected NCHW, got " + shape_to_string(hq.shape()));
  const std::size_t h0 = hq.shape()[2], w0 = hq.shape()[3];
  // Reject manifests whose resize chain collapses the image.
  {
    std::size_t h = h0, w = w0;
    for (const auto& order : m.orders)
      for (const auto& s : order)
        if (const auto* r = std::get_if<ResizeStage>(&s)) {
          h = scaled_extent(h, r->scale);
          w = scaled_extent(w, r->scale);
          if (h == 0 || w == 0) {
            throw ShapeError("apply_manifest: input " + shape_to_string(hq.shape()) +
                             " is too small for the manifest's net scale " + std::to_string(m.final_scale));
          }
        }
  }
  Var x = hq;
  for (const auto& order : m.orders) {
    for (const auto& stage : order) {
      if (const auto* b = std::get_if<BlurStage>(&stage)) {
        // A zero-width blur is the delta kernel.
        if (b->tau_x != 0.0 || b->tau_y != 0.0) x = ops::blur_same(x, build_blur_kernel(*b));
      } else if (const auto* r = std::get_if<ResizeStage>(&stage)) {
        const std::size_t h = scaled_extent(x.shape()[2], r->scale), w = scaled_extent(x.shape()[3], r->scale);
        x = r->mode == ResizeMode::kNearest ? ops::resize_nearest(x, h, w) : ops::resize_bilinear(x, h, w);
      } else if (const auto* n = std::get_if<NoiseStage>(&stage)) {
        x = ops::clamp(ops::add(x, Var::constant(noise_field(*n, x.shape()))), 0.0, 1.0);
      } else if (const auto* j = std::get_if<JpegStage>(&stage)) {
        x = jpeg_proxy(x, j->quality);
      }
    }
  }
  if (x.shape()[2] != h0 || x.shape()[3] != w0) x = ops::resize_bilinear(x, h0, w0);
  return ops::clamp(x, 0.0, 1.0);
}

Tensor apply_manifest(const DegradationManifest& m, const Tensor& hq) {
  return apply_manifest(m, Var::constant(hq)).value();
}

}  // namespace irib::degrade
