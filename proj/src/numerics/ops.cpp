#include "irib/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>

namespace irib {
namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(a.shape()));
  }
}

void accumulate(Tape& tape, const Var& v, std::span<const double> g) {
  if (!v.requires_grad()) return;
  auto buf = tape.grad_buffer(v);
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

// y = f(x) elementwise; dfdx(x, y) gives the local derivative.
template <class F, class DF>
Var unary(const Var& a, F f, DF dfdx) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  Tape* tape = a.tape();
  if (!tape) return Var::constant(std::move(out));
  auto y = std::make_shared<const Tensor>(out);
  return tape->record(std::move(out), [a, y, dfdx](std::span<const double> g, Tape& t) {
    auto ga = t.grad_buffer(a);
    const Tensor& xv = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i], (*y)[i]);
  });
}

}  // namespace

namespace ops {

Var detach(const Var& a) { return Var::constant(a.value()); }

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  Tape* tape = common_tape({&a, &b});
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [a, b](std::span<const double> g, Tape& t) {
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  Tape* tape = common_tape({&a, &b});
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [a, b](std::span<const double> g, Tape& t) {
    accumulate(t, a, g);
    if (b.requires_grad()) {
      auto gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  Tape* tape = common_tape({&a, &b});
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [a, b](std::span<const double> g, Tape& t) {
    if (a.requires_grad()) {
      auto ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      auto gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var silu(const Var& a) {
  return unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var soft_round(const Var& a, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("soft_round: alpha must be positive");
  const double denom = 2.0 * std::tanh(alpha / 2.0);
  return unary(
      a,
      [alpha, denom](double x) {
        const double f = std::floor(x);
        return f + 0.5 + std::tanh(alpha * (x - f - 0.5)) / denom;
      },
      [alpha, denom](double x, double) {
        const double c = std::cosh(alpha * (x - std::floor(x) - 0.5));
        return alpha / (denom * c * c);
      });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  Tape* tape = a.tape();
  if (!tape) return Var::constant(Tensor::scalar(s));
  return tape->record(Tensor::scalar(s), [a](std::span<const double> g, Tape& t) {
    auto ga = t.grad_buffer(a);
    for (auto& v : ga) v += g[0];
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mse(const Var& a, const Var& b) {
  require_same_shape("mse", a, b);
  const std::size_t n = a.value().size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  s /= static_cast<double>(n);
  Tape* tape = common_tape({&a, &b});
  if (!tape) return Var::constant(Tensor::scalar(s));
  return tape->record(Tensor::scalar(s), [a, b, n](std::span<const double> g, Tape& t) {
    const double k = 2.0 * g[0] / static_cast<double>(n);
    if (a.requires_grad()) {
      auto ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < n; ++i) ga[i] += k * (a.value()[i] - b.value()[i]);
    }
    if (b.requires_grad()) {
      auto gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < n; ++i) gb[i] -= k * (a.value()[i] - b.value()[i]);
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  Tape* tape = a.tape();
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [a](std::span<const double> g, Tape& t) { accumulate(t, a, g); });
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeom {
  std::size_t n, c, h, w, o, kh, kw, stride, pad, oh, ow;
  std::size_t rows() const { return c * kh * kw; }
  std::size_t cols() const { return oh * ow; }
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Per-thread reusable buffers; large per-call allocations dominate otherwise.
std::vector<double>& scratch(int slot, std::size_t size) {
  thread_local std::vector<double> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < size) b.resize(size);
  return b;
}

// Output columns [lo, hi) whose input column ox*s + k - p lies inside [0, in).
inline void valid_range(std::size_t k, const ConvGeom& g, std::size_t in, std::size_t out, std::size_t& lo,
                        std::size_t& hi) {
  const auto kk = static_cast<std::ptrdiff_t>(k), pp = static_cast<std::ptrdiff_t>(g.pad);
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  const std::ptrdiff_t l = pp > kk ? (pp - kk + s - 1) / s : 0;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(in) - 1 + pp - kk;
  const std::ptrdiff_t h = last < 0 ? 0 : last / s + 1;
  const auto o = static_cast<std::ptrdiff_t>(out);
  lo = static_cast<std::size_t>(std::min(l, o));
  hi = static_cast<std::size_t>(std::max(std::min(h, o), std::min(l, o)));
}

// col[(c*kh + ky)*kw + kx][oy*ow + ox] = in[c][oy*s + ky - p][ox*s + kx - p], zero outside.
void im2col(const ConvGeom& g, const double* in, double* col) {
  std::fill(col, col + g.rows() * g.cols(), 0.0);
  for (std::size_t ky = 0; ky < g.kh; ++ky) {
    std::size_t ylo, yhi;
    valid_range(ky, g, g.h, g.oh, ylo, yhi);
    for (std::size_t kx = 0; kx < g.kw; ++kx) {
      std::size_t xlo, xhi;
      valid_range(kx, g, g.w, g.ow, xlo, xhi);
      for (std::size_t c = 0; c < g.c; ++c) {
        double* dst = col + ((c * g.kh + ky) * g.kw + kx) * g.cols();
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          const double* srow = in + (c * g.h + oy * g.stride + ky - g.pad) * g.w + kx - g.pad;
          double* drow = dst + oy * g.ow;
          if (g.stride == 1) {
            for (std::size_t ox = xlo; ox < xhi; ++ox) drow[ox] = srow[ox];
          } else {
            for (std::size_t ox = xlo; ox < xhi; ++ox) drow[ox] = srow[ox * g.stride];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeom& g, const double* col, double* in) {
  for (std::size_t ky = 0; ky < g.kh; ++ky) {
    std::size_t ylo, yhi;
    valid_range(ky, g, g.h, g.oh, ylo, yhi);
    for (std::size_t kx = 0; kx < g.kw; ++kx) {
      std::size_t xlo, xhi;
      valid_range(kx, g, g.w, g.ow, xlo, xhi);
      for (std::size_t c = 0; c < g.c; ++c) {
        const double* src = col + ((c * g.kh + ky) * g.kw + kx) * g.cols();
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          double* drow = in + (c * g.h + oy * g.stride + ky - g.pad) * g.w + kx - g.pad;
          const double* srow = src + oy * g.ow;
          if (g.stride == 1) {
            for (std::size_t ox = xlo; ox < xhi; ++ox) drow[ox] += srow[ox];
          } else {
            for (std::size_t ox = xlo; ox < xhi; ++ox) drow[ox * g.stride] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, std::size_t stride, std::size_t padding) {
  require_rank("conv2d input", input, 4);
  require_rank("conv2d kernel", kernel, 4);
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (is[1] != ks[1]) {
    throw ShapeError("conv2d: input " + shape_to_string(is) + " has " + std::to_string(is[1]) +
                     " channels but kernel " + shape_to_string(ks) + " expects " + std::to_string(ks[1]));
  }
  if (is[2] + 2 * padding < ks[2] || is[3] + 2 * padding < ks[3]) {
    throw ShapeError("conv2d: padded input " + shape_to_string(is) + " (pad " + std::to_string(padding) +
                     ") smaller than kernel " + shape_to_string(ks));
  }
  ConvGeom g{is[0], is[1], is[2], is[3], ks[0], ks[2], ks[3], stride, padding, 0, 0};
  g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
  g.ow = (g.w + 2 * padding - g.kw) / stride + 1;
  Tensor out(Shape{g.n, g.o, g.oh, g.ow});
  std::vector<double>& col = scratch(0, g.rows() * g.cols());
  const ConstMapMat kmat(kernel.value().data().data(), static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(g.rows()));
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, input.value().data().data() + n * g.c * g.h * g.w, col.data());
    MapMat omat(out.data().data() + n * g.o * g.cols(), static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(g.cols()));
    omat.noalias() = kmat * ConstMapMat(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
  }
  Tape* tape = common_tape({&input, &kernel});
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [input, kernel, g](std::span<const double> gout, Tape& t) {
    const auto rows = static_cast<Eigen::Index>(g.rows()), cols = static_cast<Eigen::Index>(g.cols());
    const auto oc = static_cast<Eigen::Index>(g.o);
    const ConstMapMat kmat(kernel.value().data().data(), oc, rows);
    std::vector<double>& col = scratch(0, g.rows() * g.cols());
    std::vector<double>& gcol = scratch(1, g.rows() * g.cols());
    for (std::size_t n = 0; n < g.n; ++n) {
      const ConstMapMat go(gout.data() + n * g.o * g.cols(), oc, cols);
      if (kernel.requires_grad()) {
        im2col(g, input.value().data().data() + n * g.c * g.h * g.w, col.data());
        MapMat gk(t.grad_buffer(kernel).data(), oc, rows);
        gk.noalias() += go * ConstMapMat(col.data(), rows, cols).transpose();
      }
      if (input.requires_grad()) {
        MapMat(gcol.data(), rows, cols).noalias() = kmat.transpose() * go;
        col2im_add(g, gcol.data(), t.grad_buffer(input).data() + n * g.c * g.h * g.w);
      }
    }
  });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  require_rank("add_channel_bias", x, 4);
  const Shape& s = x.shape();
  if (bias.shape() != Shape{s[1]}) {
    throw ShapeError("add_channel_bias: bias " + shape_to_string(bias.shape()) + " for input " + shape_to_string(s));
  }
  const std::size_t plane = s[2] * s[3];
  Tensor out = x.value();
  for (std::size_t n = 0; n < s[0]; ++n)
    for (std::size_t c = 0; c < s[1]; ++c) {
      double* p = out.data().data() + (n * s[1] + c) * plane;
      const double b = bias.value()[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  Tape* tape = common_tape({&x, &bias});
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [x, bias, s, plane](std::span<const double> g, Tape& t) {
    accumulate(t, x, g);
    if (bias.requires_grad()) {
      auto gb = t.grad_buffer(bias);
      for (std::size_t n = 0; n < s[0]; ++n)
        for (std::size_t c = 0; c < s[1]; ++c) {
          const double* p = g.data() + (n * s[1] + c) * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += p[i];
          gb[c] += acc;
        }
    }
  });
}

Var film(const Var& x, const Var& gamma, const Var& beta) {
  require_rank("film", x, 4);
  const Shape& s = x.shape();
  const Shape nc{s[0], s[1]};
  if (gamma.shape() != nc || beta.shape() != nc) {
    throw ShapeError("film: gamma " + shape_to_string(gamma.shape()) + " / beta " + shape_to_string(beta.shape()) +
                     " must be " + shape_to_string(nc));
  }
  const std::size_t plane = s[2] * s[3];
  Tensor out(s);
  for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
    const double a = 1.0 + gamma.value()[k], b = beta.value()[k];
    const double* src = x.value().data().data() + k * plane;
    double* dst = out.data().data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = a * src[i] + b;
  }
  Tape* tape = common_tape({&x, &gamma, &beta});
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [x, gamma, beta, s, plane](std::span<const double> g, Tape& t) {
    for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
      const double* gp = g.data() + k * plane;
      const double* xp = x.value().data().data() + k * plane;
      if (x.requires_grad()) {
        double* gx = t.grad_buffer(x).data() + k * plane;
        const double a = 1.0 + gamma.value()[k];
        for (std::size_t i = 0; i < plane; ++i) gx[i] += a * gp[i];
      }
      if (gamma.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += gp[i] * xp[i];
        t.grad_buffer(gamma)[k] += acc;
      }
      if (beta.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
        t.grad_buffer(beta)[k] += acc;
      }
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank("linear input", x, 2);
  require_rank("linear weight", weight, 2);
  const std::size_t n = x.shape()[0], d = x.shape()[1], o = weight.shape()[0];
  if (weight.shape()[1] != d || bias.shape() != Shape{o}) {
    throw ShapeError("linear: input " + shape_to_string(x.shape()) + ", weight " + shape_to_string(weight.shape()) +
                     ", bias " + shape_to_string(bias.shape()));
  }
  Tensor out(Shape{n, o});
  const auto& xv = x.value();
  const auto& wv = weight.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < o; ++j) {
      double acc = bias.value()[j];
      for (std::size_t k = 0; k < d; ++k) acc += wv[j * d + k] * xv[r * d + k];
      out[r * o + j] = acc;
    }
  Tape* tape = common_tape({&x, &weight, &bias});
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [x, weight, bias, n, d, o](std::span<const double> g, Tape& t) {
    const auto& xv = x.value();
    const auto& wv = weight.value();
    if (x.requires_grad()) {
      auto gx = t.grad_buffer(x);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < o; ++j)
          for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += g[r * o + j] * wv[j * d + k];
    }
    if (weight.requires_grad()) {
      auto gw = t.grad_buffer(weight);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < o; ++j)
          for (std::size_t k = 0; k < d; ++k) gw[j * d + k] += g[r * o + j] * xv[r * d + k];
    }
    if (bias.requires_grad()) {
      auto gb = t.grad_buffer(bias);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < o; ++j) gb[j] += g[r * o + j];
    }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank("global_avg_pool", x, 4);
  const Shape& s = x.shape();
  const std::size_t plane = s[2] * s[3];
  Tensor out(Shape{s[0], s[1]});
  for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
    double acc = 0.0;
    const double* p = x.value().data().data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    out[k] = acc / static_cast<double>(plane);
  }
  Tape* tape = x.tape();
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [x, s, plane](std::span<const double> g, Tape& t) {
    auto gx = t.grad_buffer(x);
    for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
      const double v = g[k] / static_cast<double>(plane);
      for (std::size_t i = 0; i < plane; ++i) gx[k * plane + i] += v;
    }
  });
}

Var grid_avg_pool(const Var& x, std::size_t g) {
  require_rank("grid_avg_pool", x, 4);
  const Shape& s = x.shape();
  if (g == 0 || s[2] < g || s[3] < g) {
    throw ShapeError("grid_avg_pool: grid " + std::to_string(g) + " does not fit " + shape_to_string(s));
  }
  const std::size_t cells = g * g, planes = s[0] * s[1], hw = s[2] * s[3];
  Tensor out(Shape{s[0], s[1] * cells});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.value().data().data() + p * hw;
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = 0; j < g; ++j) {
        const std::size_t y0 = i * s[2] / g, y1 = (i + 1) * s[2] / g, x0 = j * s[3] / g, x1 = (j + 1) * s[3] / g;
        double acc = 0.0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t xx = x0; xx < x1; ++xx) acc += src[y * s[3] + xx];
        out[p * cells + i * g + j] = acc / static_cast<double>((y1 - y0) * (x1 - x0));
      }
  }
  Tape* tape = x.tape();
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [x, s, g, cells, planes, hw](std::span<const double> gr, Tape& t) {
    auto gx = t.grad_buffer(x);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j) {
          const std::size_t y0 = i * s[2] / g, y1 = (i + 1) * s[2] / g, x0 = j * s[3] / g, x1 = (j + 1) * s[3] / g;
          const double v = gr[p * cells + i * g + j] / static_cast<double>((y1 - y0) * (x1 - x0));
          for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t xx = x0; xx < x1; ++xx) gx[p * hw + y * s[3] + xx] += v;
        }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank("concat_cols", a, 2);
  require_rank("concat_cols", b, 2);
  const std::size_t n = a.shape()[0], da = a.shape()[1], db = b.shape()[1];
  if (b.shape()[0] != n) throw ShapeError("concat_cols: row counts differ");
  Tensor out(Shape{n, da + db});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < da; ++k) out[r * (da + db) + k] = a.value()[r * da + k];
    for (std::size_t k = 0; k < db; ++k) out[r * (da + db) + da + k] = b.value()[r * db + k];
  }
  Tape* tape = common_tape({&a, &b});
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [a, b, n, da, db](std::span<const double> g, Tape& t) {
    if (a.requires_grad()) {
      auto ga = t.grad_buffer(a);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < da; ++k) ga[r * da + k] += g[r * (da + db) + k];
    }
    if (b.requires_grad()) {
      auto gb = t.grad_buffer(b);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < db; ++k) gb[r * db + k] += g[r * (da + db) + da + k];
    }
  });
}

Var l2_normalize_rows(const Var& x, double eps) {
  require_rank("l2_normalize_rows", x, 2);
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  Tensor out(x.shape());
  std::vector<double> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += x.value()[r * d + k] * x.value()[r * d + k];
    norms[r] = std::max(std::sqrt(s), eps);
    for (std::size_t k = 0; k < d; ++k) out[r * d + k] = x.value()[r * d + k] / norms[r];
  }
  Tape* tape = x.tape();
  if (!tape) return Var::constant(std::move(out));
  auto y = std::make_shared<const Tensor>(out);
  return tape->record(std::move(out), [x, y, norms, n, d](std::span<const double> g, Tape& t) {
    auto gx = t.grad_buffer(x);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += g[r * d + k] * (*y)[r * d + k];
      for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += (g[r * d + k] - dot * (*y)[r * d + k]) / norms[r];
    }
  });
}

// ---------------------------------------------------------------------------
// Spatial resampling

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

Var remap_spatial(const Var& x, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
  require_rank("remap_spatial", x, 4);
  const Shape& s = x.shape();
  for (auto r : rows)
    if (r >= s[2]) throw ShapeError("remap_spatial: row index out of range for " + shape_to_string(s));
  for (auto c : cols)
    if (c >= s[3]) throw ShapeError("remap_spatial: column index out of range for " + shape_to_string(s));
  const std::size_t oh = rows.size(), ow = cols.size();
  Tensor out(Shape{s[0], s[1], oh, ow});
  for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
    const double* src = x.value().data().data() + k * s[2] * s[3];
    double* dst = out.data().data() + k * oh * ow;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) dst[y * ow + xx] = src[rows[y] * s[3] + cols[xx]];
  }
  Tape* tape = x.tape();
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [x, rows, cols, s](std::span<const double> g, Tape& t) {
    auto gx = t.grad_buffer(x);
    const std::size_t oh = rows.size(), ow = cols.size();
    for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
      double* dst = gx.data() + k * s[2] * s[3];
      const double* src = g.data() + k * oh * ow;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) dst[rows[y] * s[3] + cols[xx]] += src[y * ow + xx];
    }
  });
}

Var pad_reflect(const Var& x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right) {
  require_rank("pad_reflect", x, 4);
  const std::size_t h = x.shape()[2], w = x.shape()[3];
  std::vector<std::size_t> rows(h + top + bottom), cols(w + left + right);
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i] = reflect_index(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(top), h);
  for (std::size_t i = 0; i < cols.size(); ++i)
    cols[i] = reflect_index(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(left), w);
  return remap_spatial(x, rows, cols);
}

Var crop(const Var& x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  require_rank("crop", x, 4);
  if (h == 0 || w == 0 || y0 + h > x.shape()[2] || x0 + w > x.shape()[3]) {
    throw ShapeError("crop: window exceeds " + shape_to_string(x.shape()));
  }
  std::vector<std::size_t> rows(h), cols(w);
  for (std::size_t i = 0; i < h; ++i) rows[i] = y0 + i;
  for (std::size_t i = 0; i < w; ++i) cols[i] = x0 + i;
  return remap_spatial(x, rows, cols);
}

namespace {

struct Taps {
  std::vector<std::size_t> i0, i1;
  std::vector<double> w1;  // weight of i1; i0 gets 1 - w1
};

Taps bilinear_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w1.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    t.i0[d] = lo;
    t.i1[d] = std::min(lo + 1, in - 1);
    t.w1[d] = t.i1[d] == lo ? 0.0 : src - static_cast<double>(lo);
  }
  return t;
}

}  // namespace

Var resize_bilinear(const Var& x, std::size_t out_h, std::size_t out_w) {
  require_rank("resize_bilinear", x, 4);
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: output extents must be positive");
  const Shape& s = x.shape();
  const Taps ty = bilinear_taps(s[2], out_h), tx = bilinear_taps(s[3], out_w);
  Tensor out(Shape{s[0], s[1], out_h, out_w});
  for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
    const double* src = x.value().data().data() + k * s[2] * s[3];
    double* dst = out.data().data() + k * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const double wy = ty.w1[y];
      const double* r0 = src + ty.i0[y] * s[3];
      const double* r1 = src + ty.i1[y] * s[3];
      for (std::size_t xx = 0; xx < out_w; ++xx) {
        const double wx = tx.w1[xx];
        const double top = (1.0 - wx) * r0[tx.i0[xx]] + wx * r0[tx.i1[xx]];
        const double bot = (1.0 - wx) * r1[tx.i0[xx]] + wx * r1[tx.i1[xx]];
        dst[y * out_w + xx] = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  Tape* tape = x.tape();
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [x, ty, tx, s, out_h, out_w](std::span<const double> g, Tape& t) {
    auto gx = t.grad_buffer(x);
    for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
      double* dst = gx.data() + k * s[2] * s[3];
      const double* src = g.data() + k * out_h * out_w;
      for (std::size_t y = 0; y < out_h; ++y) {
        const double wy = ty.w1[y];
        double* r0 = dst + ty.i0[y] * s[3];
        double* r1 = dst + ty.i1[y] * s[3];
        for (std::size_t xx = 0; xx < out_w; ++xx) {
          const double wx = tx.w1[xx];
          const double v = src[y * out_w + xx];
          r0[tx.i0[xx]] += (1.0 - wy) * (1.0 - wx) * v;
          r0[tx.i1[xx]] += (1.0 - wy) * wx * v;
          r1[tx.i0[xx]] += wy * (1.0 - wx) * v;
          r1[tx.i1[xx]] += wy * wx * v;
        }
      }
    }
  });
}

Var resize_nearest(const Var& x, std::size_t out_h, std::size_t out_w) {
  require_rank("resize_nearest", x, 4);
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_nearest: output extents must be positive");
  auto index = [](std::size_t in, std::size_t out) {
    std::vector<std::size_t> idx(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
      idx[d] = std::min(static_cast<std::size_t>(std::floor((static_cast<double>(d) + 0.5) * ratio)), in - 1);
    }
    return idx;
  };
  return remap_spatial(x, index(x.shape()[2], out_h), index(x.shape()[3], out_w));
}

Var blur_same(const Var& x, const Tensor& kernel) {
  require_rank("blur_same", x, 4);
  if (kernel.rank() != 2 || kernel.dim(0) != kernel.dim(1) || kernel.dim(0) % 2 == 0) {
    throw ShapeError("blur_same: kernel must be square with odd extent, got " + shape_to_string(kernel.shape()));
  }
  const Shape s = x.shape();
  const std::size_t k = kernel.dim(0), r = k / 2;
  if (k == 1) return scale(x, kernel[0]);
  Var planes = reshape(x, Shape{s[0] * s[1], 1, s[2], s[3]});
  Var padded = pad_reflect(planes, r, r, r, r);
  Var out = conv2d(padded, Var::constant(kernel.reshaped(Shape{1, 1, k, k})));
  return reshape(out, s);
}

Var block_dct8(const Var& x, bool inverse) {
  require_rank("block_dct8", x, 4);
  const Shape& s = x.shape();
  if (s[2] % 8 != 0 || s[3] % 8 != 0) {
    throw ShapeError("block_dct8: spatial extents must be multiples of 8, got " + shape_to_string(s));
  }
  const auto& D = dct8_matrix();
  // forward: Y = D X D^T; inverse: X = D^T Y D. The adjoint of one is the other.
  auto transform = [&D, s](const double* in, double* out, bool inv) {
    const std::size_t w = s[3];
    double tmp[64], blk[64];
    for (std::size_t k = 0; k < s[0] * s[1]; ++k) {
      const double* src = in + k * s[2] * w;
      double* dst = out + k * s[2] * w;
      for (std::size_t by = 0; by < s[2]; by += 8)
        for (std::size_t bx = 0; bx < w; bx += 8) {
          for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) blk[i * 8 + j] = src[(by + i) * w + bx + j];
          // rows: tmp = M blk, then cols: res = tmp M^T, M = D or D^T.
          for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
              double acc = 0.0;
              for (std::size_t m = 0; m < 8; ++m) acc += (inv ? D[m * 8 + i] : D[i * 8 + m]) * blk[m * 8 + j];
              tmp[i * 8 + j] = acc;
            }
          for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) {
              double acc = 0.0;
              for (std::size_t m = 0; m < 8; ++m) acc += tmp[i * 8 + m] * (inv ? D[m * 8 + j] : D[j * 8 + m]);
              dst[(by + i) * w + bx + j] += acc;
            }
        }
    }
  };
  Tensor out(s);
  transform(x.value().data().data(), out.data().data(), inverse);
  Tape* tape = x.tape();
  if (!tape) return Var::constant(std::move(out));
  return tape->record(std::move(out), [x, transform, inverse](std::span<const double> g, Tape& t) {
    transform(g.data(), t.grad_buffer(x).data(), !inverse);
  });
}

}  // namespace ops

Tensor gaussian_kernel2d(double tau, std::size_t radius) {
  if (tau < 0.0 || !std::isfinite(tau)) throw std::invalid_argument("gaussian_kernel2d: tau must be finite and >= 0");
  if (radius == 0) throw std::invalid_argument("gaussian_kernel2d: radius must be positive");
  if (tau > 0.0 && static_cast<double>(radius) < std::ceil(3.0 * tau)) {
    throw std::invalid_argument("gaussian_kernel2d: radius must be at least ceil(3 tau)");
  }
  const std::size_t k = 2 * radius + 1;
  Tensor out(Shape{k, k});
  if (tau == 0.0) {
    out[radius * k + radius] = 1.0;
    return out;
  }
  double total = 0.0;
  const auto r = static_cast<std::ptrdiff_t>(radius);
  for (std::ptrdiff_t i = -r; i <= r; ++i)
    for (std::ptrdiff_t j = -r; j <= r; ++j) {
      const double v = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * tau * tau));
      out[static_cast<std::size_t>((i + r) * static_cast<std::ptrdiff_t>(k) + j + r)] = v;
      total += v;
    }
  for (auto& v : out.data()) v /= total;
  return out;
}

const std::vector<double>& dct8_matrix() {
  static const std::vector<double> m = [] {
    std::vector<double> d(64);
    for (std::size_t k = 0; k < 8; ++k)
      for (std::size_t n = 0; n < 8; ++n) {
        const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
        d[k * 8 + n] = a * std::cos(std::numbers::pi * (2.0 * static_cast<double>(n) + 1.0) *
                                    static_cast<double>(k) / 16.0);
      }
    return d;
  }();
  return m;
}

}  // namespace irib
