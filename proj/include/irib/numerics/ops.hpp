#pragma once

#include <cstddef>
#include <vector>

#include "irib/numerics/autodiff.hpp"
#include "irib/numerics/tensor.hpp"

// Differentiable operations on Var. Every op works on constants too (no tape
// is touched when no operand requires a gradient). Images are NCHW.
namespace irib::ops {

Var detach(const Var& a);

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var exp(const Var& a);
Var silu(const Var& a);
Var clamp(const Var& a, double lo, double hi);
/// Smooth rounding: floor(x) + 1/2 + tanh(alpha*r) / (2 tanh(alpha/2)),
/// r = x - floor(x) - 1/2. Continuous with a continuous first derivative;
/// approaches round() as alpha grows and the identity as alpha -> 0.
Var soft_round(const Var& a, double alpha);

// Reductions to rank 0.
Var sum(const Var& a);
Var mean(const Var& a);
/// mean((a - b)^2)
Var mse(const Var& a, const Var& b);

Var reshape(const Var& a, Shape shape);

/// Cross-correlation. input [N,C,H,W], kernel [O,C,KH,KW], zero padding.
/// Output [N,O,(H+2p-KH)/s+1,(W+2p-KW)/s+1].
Var conv2d(const Var& input, const Var& kernel, std::size_t stride = 1, std::size_t padding = 0);
/// x [N,C,H,W] + bias [C] broadcast over N, H, W.
Var add_channel_bias(const Var& x, const Var& bias);
/// x [N,C,H,W] * (1 + gamma[n,c]) + beta[n,c]; gamma, beta are [N,C].
Var film(const Var& x, const Var& gamma, const Var& beta);
/// x [N,D] -> x W^T + b, W [O,D], b [O].
Var linear(const Var& x, const Var& weight, const Var& bias);
/// [N,C,H,W] -> [N,C]
Var global_avg_pool(const Var& x);
/// [N,C,H,W] -> [N, C*g*g]: means over a g x g grid of cells, channel-major.
/// Cell (i, j) spans rows [i H / g, (i+1) H / g) and likewise for columns.
Var grid_avg_pool(const Var& x, std::size_t g);
/// [N,A] and [N,B] -> [N,A+B].
Var concat_cols(const Var& a, const Var& b);
/// Row-wise L2 normalization of [N,D].
Var l2_normalize_rows(const Var& x, double eps = 1e-12);

/// Separable gather: out[n,c,y,x] = in[n,c,rows[y],cols[x]].
Var remap_spatial(const Var& x, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols);
/// Reflect-101 index for position i (may be negative or >= n) in an axis of
/// length n; folds repeatedly so any padding width is valid.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);
Var pad_reflect(const Var& x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right);
Var crop(const Var& x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

/// Bilinear resampling with align_corners = false: the source coordinate of
/// output index d is max(0, (d + 0.5) * in / out - 0.5), neighbours clamped
/// to the last row/column.
Var resize_bilinear(const Var& x, std::size_t out_h, std::size_t out_w);
/// Nearest neighbour: source index floor((d + 0.5) * in / out), clamped.
Var resize_nearest(const Var& x, std::size_t out_h, std::size_t out_w);

/// Applies one 2-D kernel [K,K] to every channel with reflect padding; output
/// has the input's shape.
Var blur_same(const Var& x, const Tensor& kernel);

/// Orthonormal 8x8 block DCT-II (or its inverse) over H and W, which must be
/// multiples of 8.
Var block_dct8(const Var& x, bool inverse = false);

}  // namespace irib::ops

namespace irib {

/// Normalized Gaussian [2r+1, 2r+1] with entries proportional to
/// exp(-(i^2+j^2) / (2 tau^2)); tau == 0 gives the delta kernel.
Tensor gaussian_kernel2d(double tau, std::size_t radius);

/// The 8x8 orthonormal DCT-II matrix, D[k][n] = a_k cos(pi (2n+1) k / 16).
const std::vector<double>& dct8_matrix();

}  // namespace irib
