#include <cmath>
#include <vector>

#include "doctest.h"
#include "irib/numerics/gradcheck.hpp"
#include "irib/numerics/ops.hpp"
#include "irib/numerics/rng.hpp"

using namespace irib;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Single-parameter gradient check over every coordinate.
double check_unary(const std::function<Var(const Var&)>& op, Tensor input, std::size_t samples = 1000) {
  Parameter p("x", std::move(input));
  Parameter* ps[] = {&p};
  // A fixed random projection turns the op's output into a scalar.
  auto loss = [&](Tape& t) {
    Var y = op(t.leaf(p));
    Tensor w = random_tensor(y.shape(), 99);
    return ops::sum(ops::mul(y, Var::constant(w)));
  };
  return finite_diff_check(loss, ps, 1e-5, samples, 7).max_rel_error;
}

// Independent bilinear oracle, written directly from the coordinate formula.
double bilinear_sample(const std::vector<std::vector<double>>& img, double sy, double sx) {
  const auto h = static_cast<int>(img.size()), w = static_cast<int>(img[0].size());
  sy = std::max(sy, 0.0);
  sx = std::max(sx, 0.0);
  int y0 = std::min(static_cast<int>(sy), h - 1), x0 = std::min(static_cast<int>(sx), w - 1);
  int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  double fy = y1 == y0 ? 0.0 : sy - y0, fx = x1 == x0 ? 0.0 : sx - x0;
  return (1 - fy) * ((1 - fx) * img[y0][x0] + fx * img[y0][x1]) + fy * ((1 - fx) * img[y1][x0] + fx * img[y1][x1]);
}

}  // namespace

TEST_CASE("conv2d: identity and full-sum kernels") {
  Var ones = Var::constant(Tensor(Shape{1, 1, 3, 3}, 1.0));
  Var k1 = Var::constant(Tensor(Shape{1, 1, 1, 1}, 1.0));
  Var out = ops::conv2d(ones, k1, 1, 0);
  CHECK(out.value() == Tensor(Shape{1, 1, 3, 3}, 1.0));

  Var x = Var::constant(Tensor(Shape{1, 1, 2, 2}, {1, 2, 3, 4}));
  Var k = Var::constant(Tensor(Shape{1, 1, 2, 2}, 1.0));
  Var s = ops::conv2d(x, k, 1, 0);
  REQUIRE(s.shape() == Shape{1, 1, 1, 1});
  CHECK(s.value()[0] == 10.0);
}

TEST_CASE("conv2d: output shape formula with stride and padding") {
  Var x = Var::constant(Tensor(Shape{2, 3, 9, 7}));
  Var k = Var::constant(Tensor(Shape{5, 3, 3, 3}));
  CHECK(ops::conv2d(x, k, 2, 1).shape() == Shape{2, 5, 5, 4});
  CHECK(ops::conv2d(x, k, 1, 0).shape() == Shape{2, 5, 7, 5});
}

TEST_CASE("conv2d: shape errors are reported") {
  Var x = Var::constant(Tensor(Shape{1, 2, 4, 4}));
  CHECK_THROWS_AS(ops::conv2d(x, Var::constant(Tensor(Shape{1, 3, 3, 3}))), ShapeError);
  CHECK_THROWS_AS(ops::conv2d(x, Var::constant(Tensor(Shape{1, 2, 5, 5}))), ShapeError);
  CHECK_THROWS_AS(ops::conv2d(Var::constant(Tensor(Shape{2, 4, 4})), Var::constant(Tensor(Shape{1, 2, 3, 3}))),
                  ShapeError);
}

TEST_CASE("conv2d: delta kernel is the identity for any input") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor x = random_tensor(Shape{2, 3, 6, 5}, seed);
    Tensor k(Shape{3, 3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c) k[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;
    Var y = ops::conv2d(Var::constant(x), Var::constant(k), 1, 1);
    CHECK(y.value() == x);
  }
}

TEST_CASE("conv2d: autodiff matches central differences") {
  Parameter input("input", random_tensor(Shape{1, 2, 8, 8}, 1));
  Parameter kernel("kernel", random_tensor(Shape{3, 2, 3, 3}, 2));
  Parameter* ps[] = {&input, &kernel};
  for (std::size_t stride : {1, 2}) {
    auto loss = [&](Tape& t) {
      Var y = ops::conv2d(t.leaf(input), t.leaf(kernel), stride, 1);
      return ops::sum(ops::square(y));
    };
    auto r = finite_diff_check(loss, ps, 1e-5, 1000, 3);
    CHECK(r.coordinates == input.value.size() + kernel.value.size());
    CHECK(r.max_rel_error <= 1e-6);
  }
}

TEST_CASE("gaussian_kernel2d") {
  SUBCASE("tau = 0 is the delta kernel") {
    Tensor k = gaussian_kernel2d(0.0, 2);
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == (i == 12 ? 1.0 : 0.0));
  }
  SUBCASE("normalized and matches the brute-force centre value") {
    Tensor k = gaussian_kernel2d(1.0, 3);
    double total = 0.0;
    for (double v : k.data()) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    double z = 0.0;
    for (int i = -3; i <= 3; ++i)
      for (int j = -3; j <= 3; ++j) z += std::exp(-(i * i + j * j) / 2.0);
    CHECK(std::abs(k[3 * 7 + 3] - 1.0 / z) <= 1e-15);
  }
  SUBCASE("symmetric under 90 degree rotation") {
    for (double tau : {0.3, 1.0, 2.5}) {
      const std::size_t r = static_cast<std::size_t>(std::ceil(3 * tau));
      Tensor k = gaussian_kernel2d(tau, r);
      const std::size_t n = 2 * r + 1;
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          CHECK(k[i * n + j] == k[j * n + (n - 1 - i)]);
          total += k[i * n + j];
        }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS(gaussian_kernel2d(-0.5, 3));
    CHECK_THROWS(gaussian_kernel2d(2.0, 3));
  }
}

TEST_CASE("resize_bilinear") {
  Tensor x = random_tensor(Shape{1, 2, 5, 7}, 4);
  SUBCASE("same size is the identity") {
    CHECK(max_abs_diff(ops::resize_bilinear(Var::constant(x), 5, 7).value(), x) <= 1e-12);
  }
  SUBCASE("constant images stay constant") {
    Var c = Var::constant(Tensor(Shape{1, 3, 6, 6}, 0.37));
    Tensor y = ops::resize_bilinear(c, 4, 9).value();
    CHECK(y.shape() == Shape{1, 3, 4, 9});
    for (double v : y.data()) CHECK(std::abs(v - 0.37) <= 1e-15);
  }
  SUBCASE("4x4 ramp downscaled to 2x2 matches the coordinate formula") {
    std::vector<std::vector<double>> img(4, std::vector<double>(4));
    Tensor t(Shape{1, 1, 4, 4});
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) t[i * 4 + j] = img[i][j] = 4.0 * i + j;
    Tensor y = ops::resize_bilinear(Var::constant(t), 2, 2).value();
    for (int oy = 0; oy < 2; ++oy)
      for (int ox = 0; ox < 2; ++ox) {
        const double expect = bilinear_sample(img, (oy + 0.5) * 2.0 - 0.5, (ox + 0.5) * 2.0 - 0.5);
        CHECK(std::abs(y[oy * 2 + ox] - expect) <= 1e-12);
      }
    // Hand values: rows 0.5 and 2.5, columns 0.5 and 2.5.
    CHECK(y[0] == doctest::Approx(2.5));
    CHECK(y[3] == doctest::Approx(12.5));
  }
  SUBCASE("upscaling matches the coordinate formula") {
    std::vector<std::vector<double>> img(5, std::vector<double>(7));
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 7; ++j) img[i][j] = x[i * 7 + j];
    Tensor y = ops::resize_bilinear(Var::constant(x), 8, 11).value();
    for (int oy = 0; oy < 8; ++oy)
      for (int ox = 0; ox < 11; ++ox) {
        const double expect = bilinear_sample(img, (oy + 0.5) * 5.0 / 8.0 - 0.5, (ox + 0.5) * 7.0 / 11.0 - 0.5);
        CHECK(std::abs(y[oy * 11 + ox] - expect) <= 1e-12);
      }
  }
  SUBCASE("zero output extents are rejected") {
    CHECK_THROWS_AS(ops::resize_bilinear(Var::constant(x), 0, 3), ShapeError);
  }
}

TEST_CASE("backward: analytic gradients") {
  Parameter p("p", Tensor(Shape{2}, {1.0, 2.0}));
  {
    Tape t;
    backward(ops::sum(t.leaf(p)));
    CHECK(p.grad == Tensor(Shape{2}, {1.0, 1.0}));
  }
  p.zero_grad();
  {
    Tape t;
    backward(ops::sum(ops::square(t.leaf(p))));
    CHECK(p.grad == Tensor(Shape{2}, {2.0, 4.0}));
  }
}

TEST_CASE("backward: non-scalar loss is rejected and unreachable params stay zero") {
  Parameter a("a", Tensor(Shape{3}, 1.0)), b("b", Tensor(Shape{3}, 2.0));
  Tape t;
  Var va = t.leaf(a);
  Var vb = t.leaf(b);
  (void)vb;
  CHECK_THROWS_AS(backward(va), ShapeError);
  backward(ops::sum(ops::square(va)));
  CHECK(b.grad == Tensor(Shape{3}));
  CHECK_THROWS(backward(Var::constant(Tensor::scalar(1.0))));
}

TEST_CASE("backward: bit-identical across repeated runs") {
  auto run = [] {
    Parameter k("k", random_tensor(Shape{4, 3, 3, 3}, 11));
    Tensor x = random_tensor(Shape{1, 3, 10, 10}, 12);
    Tape t;
    Var y = ops::silu(ops::conv2d(Var::constant(x), t.leaf(k), 1, 1));
    backward(ops::mean(ops::square(ops::resize_bilinear(y, 7, 13))));
    return k.grad;
  };
  CHECK(run() == run());
}

TEST_CASE("finite_diff_check") {
  SUBCASE("quadratic in three parameters") {
    Parameter p("p", Tensor(Shape{3}, {0.3, -1.2, 2.0}));
    Parameter* ps[] = {&p};
    auto loss = [&](Tape& t) {
      Var v = t.leaf(p);
      return ops::add(ops::sum(ops::square(v)), ops::scale(ops::sum(v), 3.0));
    };
    CHECK(finite_diff_check(loss, ps, 1e-5, 3).max_rel_error <= 1e-9);
  }
  SUBCASE("a non-deterministic function is rejected") {
    Parameter p("p", Tensor(Shape{2}, 1.0));
    Parameter* ps[] = {&p};
    int calls = 0;
    auto loss = [&](Tape& t) { return ops::add_scalar(ops::sum(t.leaf(p)), 1e-3 * ++calls); };
    CHECK_THROWS_AS(finite_diff_check(loss, ps, 1e-5, 2), NondeterministicFunctionError);
  }
}

TEST_CASE("grid pooling and column concatenation") {
  Tensor x(Shape{1, 1, 5, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  // Rows split [0,2) [2,5), columns [0,2) [2,4).
  const Tensor g = ops::grid_avg_pool(Var::constant(x), 2).value();
  REQUIRE(g.shape() == Shape{1, 4});
  CHECK(g[0] == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
  CHECK(g[1] == doctest::Approx((2 + 3 + 6 + 7) / 4.0));
  CHECK(g[2] == doctest::Approx((8 + 9 + 12 + 13 + 16 + 17) / 6.0));
  CHECK(ops::grid_avg_pool(Var::constant(x), 1).value()[0] == doctest::Approx(9.5));
  CHECK_THROWS_AS(ops::grid_avg_pool(Var::constant(x), 5), ShapeError);
  const Tensor c = ops::concat_cols(Var::constant(Tensor(Shape{2, 1}, 1.0)), Var::constant(Tensor(Shape{2, 2}, 2.0))).value();
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c[0] == 1.0);
  CHECK(c[2] == 2.0);
  CHECK(c[3] == 1.0);
  CHECK_THROWS_AS(ops::concat_cols(Var::constant(Tensor(Shape{2, 1})), Var::constant(Tensor(Shape{3, 1}))), ShapeError);
}

TEST_CASE("every differentiable op passes the finite-difference check") {
  const Tensor img = random_tensor(Shape{1, 2, 8, 8}, 21);
  const Tensor mid = random_tensor(Shape{1, 2, 8, 8}, 22, 0.1, 0.9);
  const Var other = Var::constant(random_tensor(Shape{1, 2, 8, 8}, 23));
  const double tol = 1e-4;
  CHECK(check_unary([&](const Var& v) { return ops::add(v, other); }, img) <= tol);
  CHECK(check_unary([&](const Var& v) { return ops::sub(other, v); }, img) <= tol);
  CHECK(check_unary([&](const Var& v) { return ops::mul(v, v); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::scale(ops::add_scalar(v, 0.3), -2.0); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::exp(v); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::silu(v); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::clamp(v, 0.0, 1.0); }, mid) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::soft_round(ops::scale(v, 7.3), 2.0); }, img) <= tol);
  CHECK(check_unary([&](const Var& v) { return ops::reshape(ops::mse(v, other), Shape{1}); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::global_avg_pool(v); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::l2_normalize_rows(ops::reshape(v, Shape{2, 64})); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::grid_avg_pool(v, 3); }, img) <= tol);
  CHECK(check_unary([&](const Var& v) {
          return ops::concat_cols(ops::reshape(v, Shape{1, 128}), ops::reshape(other, Shape{1, 128}));
        }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::pad_reflect(v, 3, 1, 9, 2); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::crop(v, 1, 2, 5, 4); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::resize_bilinear(v, 5, 13); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::resize_nearest(v, 5, 13); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::blur_same(v, gaussian_kernel2d(1.2, 4)); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::block_dct8(v); }, img) <= tol);
  CHECK(check_unary([](const Var& v) { return ops::block_dct8(v, true); }, img) <= tol);

  Parameter x("x", random_tensor(Shape{2, 3, 4, 4}, 31)), gamma("g", random_tensor(Shape{2, 3}, 32)),
      beta("b", random_tensor(Shape{2, 3}, 33)), bias("bias", random_tensor(Shape{3}, 34));
  Parameter* film_ps[] = {&x, &gamma, &beta, &bias};
  auto film_loss = [&](Tape& t) {
    Var y = ops::add_channel_bias(ops::film(t.leaf(x), t.leaf(gamma), t.leaf(beta)), t.leaf(bias));
    return ops::sum(ops::square(y));
  };
  CHECK(finite_diff_check(film_loss, film_ps, 1e-5, 1000).max_rel_error <= tol);

  Parameter in("in", random_tensor(Shape{3, 5}, 41)), w("w", random_tensor(Shape{4, 5}, 42)),
      b("b", random_tensor(Shape{4}, 43));
  Parameter* lin_ps[] = {&in, &w, &b};
  auto lin_loss = [&](Tape& t) { return ops::sum(ops::square(ops::linear(t.leaf(in), t.leaf(w), t.leaf(b)))); };
  CHECK(finite_diff_check(lin_loss, lin_ps, 1e-5, 1000).max_rel_error <= tol);
}

TEST_CASE("block DCT round trip and reflect indexing") {
  Tensor x = random_tensor(Shape{1, 3, 16, 8}, 51);
  Var c = ops::block_dct8(Var::constant(x));
  CHECK(max_abs_diff(ops::block_dct8(c, true).value(), x) <= 1e-10);
  CHECK_THROWS_AS(ops::block_dct8(Var::constant(Tensor(Shape{1, 1, 8, 12}))), ShapeError);
  CHECK(ops::reflect_index(-1, 4) == 1);
  CHECK(ops::reflect_index(4, 4) == 2);
  CHECK(ops::reflect_index(-7, 3) == 1);
  CHECK(ops::reflect_index(5, 1) == 0);
}

TEST_CASE("portable RNG") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c(7);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = c.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}
