#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "irib/degrade/degradation.hpp"
#include "irib/degrade/serialize.hpp"
#include "irib/numerics/gradcheck.hpp"
#include "irib/numerics/ops.hpp"

using namespace irib;
using namespace irib::degrade;

namespace {

Tensor random_image(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Orthonormal 2-D DCT-II of one 8x8 block by direct summation.
double dct_coefficient(const Tensor& img, std::size_t by, std::size_t bx, std::size_t u, std::size_t v) {
  const double pi = std::numbers::pi;
  auto alpha = [](std::size_t k) { return k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0); };
  double s = 0.0;
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      s += img.at(0, 0, by * 8 + y, bx * 8 + x) * std::cos((2.0 * y + 1.0) * u * pi / 16.0) *
           std::cos((2.0 * x + 1.0) * v * pi / 16.0);
  return alpha(u) * alpha(v) * s;
}

Tensor transpose(const Tensor& k) {
  const std::size_t n = k.shape()[0];
  Tensor t(k.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * n + i] = k[i * n + j];
  return t;
}

std::size_t count_nearest(const DegradationManifest& m) {
  std::size_t c = 0;
  for (const auto& order : m.orders)
    for (const auto& s : order)
      if (const auto* r = std::get_if<ResizeStage>(&s); r && r->mode == ResizeMode::kNearest) ++c;
  return c;
}

}  // namespace

TEST_CASE("sample_manifest is a deterministic function of preset and seed") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(sample_manifest(DegradationPreset::lq(), seed) == sample_manifest(DegradationPreset::lq(), seed));
    CHECK(sample_manifest(DegradationPreset::elq(), seed) == sample_manifest(DegradationPreset::elq(), seed));
  }
  CHECK_FALSE(sample_manifest(DegradationPreset::elq(), 1) == sample_manifest(DegradationPreset::elq(), 2));
}

TEST_CASE("sampled parameters stay inside the preset ranges") {
  for (const auto& preset : {DegradationPreset::lq(), DegradationPreset::elq()}) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto m = sample_manifest(preset, seed);
      REQUIRE(manifest_within(m, preset));
      CHECK(m.preset_id == preset.id);
      CHECK_FALSE(m.orders[0].empty());
      for (const auto& order : m.orders)
        for (const auto& s : order)
          if (const auto* b = std::get_if<BlurStage>(&s)) {
            CHECK(b->radius >= static_cast<std::size_t>(std::ceil(3.0 * std::max(b->tau_x, b->tau_y))));
          }
    }
  }
}

TEST_CASE("blur tau_x samples cover the declared span") {
  const auto preset = DegradationPreset::elq();
  const Range r = preset.orders[0].tau;
  constexpr std::size_t kBins = 40;
  std::set<std::size_t> occupied;
  double lo = r.hi, hi = r.lo;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto m = sample_manifest(preset, seed);
    for (const auto& s : m.orders[0])
      if (const auto* b = std::get_if<BlurStage>(&s)) {
        lo = std::min(lo, b->tau_x);
        hi = std::max(hi, b->tau_x);
        occupied.insert(std::min(kBins - 1, static_cast<std::size_t>((b->tau_x - r.lo) / (r.hi - r.lo) * kBins)));
      }
  }
  CHECK((hi - lo) / (r.hi - r.lo) >= 0.95);
  CHECK(static_cast<double>(occupied.size()) / kBins >= 0.95);
}

TEST_CASE("ELQ ranges contain LQ ranges") {
  CHECK(DegradationPreset::elq().covers(DegradationPreset::lq()));
  CHECK_FALSE(DegradationPreset::lq().covers(DegradationPreset::elq()));
  CHECK_NOTHROW(DegradationPreset::lq().validate());
  CHECK_NOTHROW(DegradationPreset::elq().validate());
}

TEST_CASE("differentiable presets never sample nearest-neighbour resizes") {
  std::size_t nearest = 0, nearest_diff = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    nearest += count_nearest(sample_manifest(DegradationPreset::lq(), seed));
    nearest_diff += count_nearest(sample_manifest(DegradationPreset::lq().differentiable(), seed));
  }
  CHECK(nearest > 0);
  CHECK(nearest_diff == 0);
}

TEST_CASE("apply_manifest: identity and zero-width blur") {
  const Tensor x = random_image({2, 3, 12, 10}, 3);
  CHECK(apply_manifest(DegradationManifest{}, x) == x);
  CHECK(sample_manifest(DegradationPreset::identity(), 5).is_identity());

  DegradationManifest m;
  m.orders[0].push_back(BlurStage{0.0, 0.0, 0.3, 1.0, 1});
  CHECK(apply_manifest(m, x) == x);
}

TEST_CASE("apply_manifest: noise replays the seeded stream") {
  const Tensor x({1, 3, 8, 8}, 0.5);
  for (bool gray : {false, true}) {
    DegradationManifest m;
    m.orders[0].push_back(NoiseStage{0.1, gray, 1234});
    const Tensor y = apply_manifest(m, x);
    Rng rng(1234);
    std::vector<double> draws(gray ? 64 : 192);
    for (auto& d : draws) d = 0.1 * rng.normal();
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 64; ++i) {
        const double expected = std::clamp(0.5 + draws[gray ? i : c * 64 + i], 0.0, 1.0);
        REQUIRE(y[c * 64 + i] == expected);
      }
  }
}

TEST_CASE("apply_manifest: replay is bit-identical and output stays in range") {
  const Tensor x = random_image({1, 3, 32, 32}, 11);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = sample_manifest(DegradationPreset::elq(), seed);
    const Tensor a = apply_manifest(m, x);
    const Tensor b = apply_manifest(m, x);
    REQUIRE(a == b);
    CHECK(a.shape() == x.shape());
    for (double v : a.data()) REQUIRE((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("apply_manifest: collapsing dimensions are rejected") {
  DegradationManifest m;
  m.orders[0].push_back(ResizeStage{0.25, ResizeMode::kBilinear});
  m.final_scale = 0.25;
  CHECK_THROWS_AS(apply_manifest(m, Tensor({1, 3, 1, 1}, 0.5)), ShapeError);
  CHECK_NOTHROW(apply_manifest(m, Tensor({1, 3, 8, 8}, 0.5)));
}

TEST_CASE("apply_manifest: gradients match central differences") {
  const auto preset = DegradationPreset::lq().differentiable();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto m = sample_manifest(preset, seed);
    Parameter p("x", random_image({1, 3, 16, 16}, seed, 0.2, 0.8));
    Parameter* ps[] = {&p};
    auto loss = [&](Tape& t) { return ops::mean(apply_manifest(m, t.leaf(p))); };
    CHECK(finite_diff_check(loss, ps, 1e-5, 128, seed).max_rel_error <= 1e-4);
  }
}

TEST_CASE("jpeg_proxy") {
  const Tensor x = random_image({1, 3, 16, 24}, 5);
  SUBCASE("quality 100 is a near no-op") {
    const Tensor y = jpeg_proxy(Var::constant(x), 100).value();
    CHECK(max_abs_diff(x, y) <= 1e-3);
  }
  SUBCASE("transforms without quantization invert exactly") {
    CHECK(max_abs_diff(x, jpeg_proxy(Var::constant(x), 50, false).value()) <= 1e-10);
    const Tensor odd = random_image({1, 3, 13, 11}, 6);
    CHECK(max_abs_diff(odd, jpeg_proxy(Var::constant(odd), 50, false).value()) <= 1e-10);
  }
  SUBCASE("lower quality removes more detail") {
    const double d90 = max_abs_diff(x, jpeg_proxy(Var::constant(x), 90).value());
    const double d20 = max_abs_diff(x, jpeg_proxy(Var::constant(x), 20).value());
    CHECK(d20 > d90);
  }
  SUBCASE("quality out of range is rejected") {
    CHECK_THROWS_AS(jpeg_proxy(Var::constant(x), 0), std::invalid_argument);
    CHECK_THROWS_AS(jpeg_proxy(Var::constant(x), 101), std::invalid_argument);
    CHECK_THROWS_AS(scaled_quant_table(luma_quant_table(), 0), std::invalid_argument);
  }
  SUBCASE("quality scaling follows the libjpeg rule") {
    CHECK(scaled_quant_table(luma_quant_table(), 50)[0] == 16.0);
    CHECK(scaled_quant_table(luma_quant_table(), 100)[63] == 1.0);
    CHECK(scaled_quant_table(luma_quant_table(), 1)[63] == 255.0);
  }
}

TEST_CASE("block DCT matches the dense DCT-II sum") {
  const Tensor x = random_image({1, 1, 16, 16}, 9, -1.0, 1.0);
  const Tensor c = ops::block_dct8(Var::constant(x)).value();
  double worst = 0.0;
  for (std::size_t by = 0; by < 2; ++by)
    for (std::size_t bx = 0; bx < 2; ++bx)
      for (std::size_t u = 0; u < 8; ++u)
        for (std::size_t v = 0; v < 8; ++v)
          worst = std::max(worst, std::abs(c.at(0, 0, by * 8 + u, bx * 8 + v) - dct_coefficient(x, by, bx, u, v)));
  CHECK(worst <= 1e-10);
}

TEST_CASE("build_blur_kernel") {
  SUBCASE("isotropic beta=1 reduces to the plain Gaussian") {
    for (double tau : {0.5, 1.0, 1.7}) {
      const auto r = static_cast<std::size_t>(std::ceil(3.0 * tau));
      const Tensor k = build_blur_kernel(BlurStage{tau, tau, 0.7, 1.0, r});
      CHECK(max_abs_diff(k, gaussian_kernel2d(tau, r)) <= 1e-12);
    }
  }
  SUBCASE("quarter turn and axis swap both transpose the kernel") {
    const BlurStage base{0.8, 2.0, 0.0, 1.5, 6};
    const Tensor k0 = build_blur_kernel(base);
    const Tensor rotated = build_blur_kernel(BlurStage{0.8, 2.0, std::numbers::pi / 2, 1.5, 6});
    const Tensor swapped = build_blur_kernel(BlurStage{2.0, 0.8, 0.0, 1.5, 6});
    CHECK(max_abs_diff(rotated, transpose(k0)) <= 1e-10);
    CHECK(max_abs_diff(swapped, transpose(k0)) <= 1e-10);
    CHECK(max_abs_diff(build_blur_kernel(BlurStage{2.0, 0.8, std::numbers::pi / 2, 1.5, 6}), k0) <= 1e-10);
    CHECK(max_abs_diff(k0, transpose(k0)) > 1e-3);
  }
  SUBCASE("kernels are normalized for random parameters") {
    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
      BlurStage s{rng.uniform(0.2, 4.0), rng.uniform(0.2, 4.0), rng.uniform(0.0, 3.2), rng.uniform(0.5, 4.0), 0};
      s.radius = static_cast<std::size_t>(std::ceil(3.0 * std::max(s.tau_x, s.tau_y)));
      const Tensor k = build_blur_kernel(s);
      double total = 0.0;
      for (double v : k.data()) total += v;
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
  SUBCASE("non-positive scales are rejected") {
    CHECK_THROWS_AS(build_blur_kernel(BlurStage{0.0, 1.0, 0.0, 1.0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(build_blur_kernel(BlurStage{1.0, -1.0, 0.0, 1.0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(build_blur_kernel(BlurStage{1.0, 1.0, 0.0, 0.0, 3}), std::invalid_argument);
  }
}

TEST_CASE("manifest and preset JSON round trip") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto m = sample_manifest(DegradationPreset::elq(), seed * 7919 + 1);
    const std::string text = manifest_to_json(m).dump();
    CHECK(manifest_from_json(nlohmann::ordered_json::parse(text)) == m);
  }
  const auto j = manifest_to_json(sample_manifest(DegradationPreset::lq(), 3));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"seed", "preset_id", "orders", "final_scale"});

  for (const auto& p : {DegradationPreset::lq(), DegradationPreset::elq()}) {
    CHECK(preset_from_json(nlohmann::ordered_json::parse(preset_to_json(p).dump())) == p);
  }
  CHECK_THROWS(manifest_from_json(nlohmann::ordered_json::parse(R"({"seed":1})")));
  CHECK_THROWS_AS(preset_by_name("hq"), std::invalid_argument);
}
