#include "irib/harness/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "irib/harness/config.hpp"
#include "irib/harness/parallel.hpp"
#include "irib/numerics/rng.hpp"

namespace irib::harness {
namespace {

using Rgb = std::array<double, 3>;

Rgb random_colour(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

// Even-odd point-in-polygon test.
bool inside(const std::vector<std::array<double, 2>>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) in = !in;
  }
  return in;
}

}  // namespace

Tensor synth_image(std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  const double n = static_cast<double>(size);
  Tensor img({1, 3, size, size});
  auto set = [&](std::size_t y, std::size_t x, const Rgb& c, double alpha) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      double& v = img.at(0, ch, y, x);
      v = (1.0 - alpha) * v + alpha * c[ch];
    }
  };

  // Background: bilinear blend of four corner colours.
  const Rgb c00 = random_colour(rng), c01 = random_colour(rng), c10 = random_colour(rng), c11 = random_colour(rng);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) / (n - 1), v = static_cast<double>(y) / (n - 1);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        img.at(0, ch, y, x) = (1 - u) * (1 - v) * c00[ch] + u * (1 - v) * c01[ch] + (1 - u) * v * c10[ch] + u * v * c11[ch];
      }
    }

  // Band-limited texture: a few oriented sinusoids, periods 6 to 16 pixels.
  const int waves = 2 + static_cast<int>(rng.uniform_int(0, 2));
  for (int w = 0; w < waves; ++w) {
    const double period = rng.uniform(6.0, 16.0), theta = rng.uniform(0.0, std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi), amp = rng.uniform(0.02, 0.06);
    const Rgb tint = random_colour(rng);
    const double kx = std::cos(theta) * 2.0 * std::numbers::pi / period, ky = std::sin(theta) * 2.0 * std::numbers::pi / period;
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double s = amp * std::sin(kx * static_cast<double>(x) + ky * static_cast<double>(y) + phase);
        for (std::size_t ch = 0; ch < 3; ++ch) img.at(0, ch, y, x) += s * (0.5 + tint[ch]);
      }
  }

  // Ellipses and polygons with sharp edges.
  const int shapes = 3 + static_cast<int>(rng.uniform_int(0, 4));
  for (int s = 0; s < shapes; ++s) {
    const Rgb colour = random_colour(rng);
    const double alpha = rng.uniform(0.7, 1.0);
    if (rng.bernoulli(0.5)) {
      const double cx = rng.uniform(0, n), cy = rng.uniform(0, n);
      const double rx = rng.uniform(0.08, 0.3) * n, ry = rng.uniform(0.08, 0.3) * n, rot = rng.uniform(0, std::numbers::pi);
      const double co = std::cos(rot), si = std::sin(rot);
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
          const double u = (co * dx + si * dy) / rx, v = (-si * dx + co * dy) / ry;
          if (u * u + v * v <= 1.0) set(y, x, colour, alpha);
        }
    } else {
      const int sides = 3 + static_cast<int>(rng.uniform_int(0, 3));
      const double cx = rng.uniform(0, n), cy = rng.uniform(0, n), r = rng.uniform(0.1, 0.35) * n;
      const double start = rng.uniform(0, 2 * std::numbers::pi);
      std::vector<std::array<double, 2>> poly;
      for (int k = 0; k < sides; ++k) {
        const double a = start + 2 * std::numbers::pi * k / sides + rng.uniform(-0.3, 0.3);
        const double rr = r * rng.uniform(0.6, 1.0);
        poly.push_back({cx + rr * std::cos(a), cy + rr * std::sin(a)});
      }
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
          if (inside(poly, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) set(y, x, colour, alpha);
    }
  }
  for (auto& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::vector<Tensor> synth_dataset(std::size_t n, std::size_t size, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("synth_dataset: n must be >= 1");
  return parallel_map<Tensor>(n, thread_limit(), [&](std::size_t i) { return synth_image(size, derive_seed(seed, i)); });
}

Pair replay_pair(const Tensor& hq, const degrade::DegradationManifest& lq_manifest,
                 const degrade::DegradationManifest& elq_manifest) {
  return Pair{degrade::apply_manifest(elq_manifest, hq), degrade::apply_manifest(lq_manifest, hq), hq, lq_manifest,
              elq_manifest};
}

std::vector<Pair> make_pairs(const std::vector<Tensor>& hq, const degrade::DegradationPreset& lq,
                             const degrade::DegradationPreset& elq, std::uint64_t seed) {
  lq.validate();
  elq.validate();
  return parallel_map<Pair>(hq.size(), thread_limit(), [&](std::size_t i) {
    return replay_pair(hq[i], degrade::sample_manifest(lq, derive_seed(seed, i, 0)),
                       degrade::sample_manifest(elq, derive_seed(seed, i, 1)));
  });
}

}  // namespace irib::harness
