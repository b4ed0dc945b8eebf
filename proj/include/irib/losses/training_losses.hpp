#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "irib/degrade/degradation.hpp"
#include "irib/models/features.hpp"
#include "irib/models/network.hpp"
#include "irib/models/prior.hpp"

namespace irib::losses {

struct LossWeights {
  double beta = 1.0;
  /// LQ likelihood std; the default makes 1 / (2 sigma^2) == 1.
  double sigma = 0.7071067811865476;
  /// Std (pixels) of the low-pass applied before the LQ reconstruction MSE.
  double tau = 1.0;
  /// Size of the HQ blur kernel; its std is (k - 1) / 6.
  std::size_t k = 7;
  double lambda_l2 = 1.0;
  double lambda_perc = 1.0;
  double lambda_blur = 0.5;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

nlohmann::ordered_json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::ordered_json& j);

struct LossReport {
  double lq_recon = 0.0;
  double hq_prior = 0.0;
  double hq_fid_l2 = 0.0;
  double hq_fid_perc = 0.0;
  double hq_fid_blur = 0.0;
  double total = 0.0;

  double sum_of_parts() const { return lq_recon + hq_prior + hq_fid_l2 + hq_fid_perc + hq_fid_blur; }
};

/// One JSON object per line; `step` leads the record.
nlohmann::ordered_json to_json(const LossReport& r, std::size_t step);

/// Normalized Gaussian low-pass of std `tau`; the delta kernel at tau = 0.
Tensor lowpass_kernel(double tau);
/// The HQ blur kernel G_k: size k (odd), std (k - 1) / 6.
Tensor hq_blur_kernel(std::size_t k);

/// (1 / (2 sigma^2)) * mean((G_tau * D(z_hat) - G_tau * x_lq)^2), with D the
/// manifest replay. Differentiable through D and G_tau.
Var lq_recon_blur_mse(const Var& z_hat, const Tensor& x_lq, const degrade::DegradationManifest& manifest,
                      const LossWeights& w);

/// Images in [0, 1] enter the diffusion prior as 2 z - 1.
Var to_prior_domain(const Var& z);

/// Draws (t, eps) from a stream seeded by `seed`.
struct NoiseDraw {
  std::size_t t;
  Tensor eps;
};
NoiseDraw draw_noise(const Shape& shape, std::size_t steps, std::uint64_t seed);

/// (1/2) * mean((eps_student(z_t, t) - eps_prior(z_t, t))^2) with
/// z_t = noising(2 z_hat - 1, t, eps). Both predictors are frozen here;
/// gradients flow only into z_hat.
Var hq_prior_loss(const Var& z_hat, const models::PriorScore& prior, const models::PriorScore& student,
                  std::uint64_t seed);

struct FidTerms {
  Var l2;
  Var perc;
  Var blur;
};

/// Weighted pixel, feature and blurred-pixel fidelity terms (all mean
/// reductions). The feature term sums the per-layer mean squared differences.
FidTerms hq_fid_loss(const Var& z_hat, const Tensor& z, const models::FeatureExtractor& features,
                     const LossWeights& w);

/// Sum over extractor layers of mean squared feature differences.
Var perceptual_distance(const Var& a, const Var& b, const models::FeatureExtractor& features);

/// A paired training item and the per-step randomness used to score it.
struct LossItem {
  Tensor x_elq;
  Tensor x_lq;
  Tensor z_hq;
  /// Condition for the projector (after dropout).
  models::Condition condition;
  /// Fresh degrade-back manifest for the LQ reconstruction term.
  degrade::DegradationManifest degrade_back;
  std::uint64_t noise_seed = 0;
};

struct FrozenModels {
  const models::ResidualNet* restorer = nullptr;  // null: direct pipeline
  const models::PriorScore* prior = nullptr;
  const models::PriorScore* student = nullptr;
  const models::FeatureExtractor* features = nullptr;
};

struct LossEval {
  Var total;
  Var z_hat;
  Var lq_proxy;  // f(x_elq; c); equals z_hat for the direct pipeline
  LossReport report;
};

/// Full objective for one item on `tape`, with the trainable network's
/// weights as tape leaves.
///
/// Decomposed (restorer set): z_hat = g(f(x_elq; c); Y(f(x_elq; c))), and
/// total = lq_recon + beta * hq_prior + l2 + perc + blur.
/// Direct (restorer null): z_hat = f(x_elq; c), and the LQ reconstruction
/// term is omitted.
LossEval total_loss(const LossItem& item, models::ResidualNet& trainable, const FrozenModels& frozen,
                    const LossWeights& w, Tape& tape);

}  // namespace irib::losses
