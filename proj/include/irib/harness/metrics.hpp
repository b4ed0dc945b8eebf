#pragma once

#include <vector>

#include <Eigen/Dense>

#include "irib/models/features.hpp"
#include "irib/numerics/tensor.hpp"

namespace irib::harness {

/// Reported value for identical images.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) for images in [0, 1], capped at kPsnrCap.
double psnr(const Tensor& a, const Tensor& b);

/// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2, valid-window statistics averaged over channels.
double ssim(const Tensor& a, const Tensor& b);

/// mean((G * a - G * b)^2) with the Gaussian low-pass of std `tau`.
double blur_mse(const Tensor& a, const Tensor& b, double tau);

/// Per-layer mean squared feature difference, summed over layers.
double perceptual_proxy(const Tensor& a, const Tensor& b, const models::FeatureExtractor& y);

/// Pooled (unnormalized) features of each image as rows.
Eigen::MatrixXd embed_all(const std::vector<Tensor>& images, const models::FeatureExtractor& y);

/// Frechet distance between Gaussian fits of two embedding sets:
/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2).
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

double fid_proxy(const std::vector<Tensor>& a, const std::vector<Tensor>& b, const models::FeatureExtractor& y);

}  // namespace irib::harness
