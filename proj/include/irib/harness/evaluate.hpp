#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "irib/harness/config.hpp"
#include "irib/harness/data.hpp"
#include "irib/harness/train.hpp"
#include "irib/models/features.hpp"
#include "irib/models/network.hpp"

namespace irib::harness {

struct MetricsRow {
  std::string method;
  int lfo = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double blur_mse = 0.0;
  double perc_proxy = 0.0;
  double fid_proxy = 0.0;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Mean PSNR / SSIM / blur-MSE / perceptual proxy over the set, and the
/// FID proxy of the whole restored set against the references.
MetricsRow score(const std::string& method, int lfo, const std::vector<Tensor>& restored,
                 const std::vector<Tensor>& reference, const models::FeatureExtractor& y, double blur_tau);

/// RFC 4180 CSV with header method,lfo,psnr,ssim,blur_mse,perc_proxy,fid_proxy
/// and CRLF line breaks. Reals are printed with 17 significant digits.
std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// net(x_elq; Y(x_elq)) for every test pair.
std::vector<Tensor> restore_direct(const models::ResidualNet& net, const std::vector<Pair>& test,
                                   const models::FeatureExtractor& y);
/// Final HQ of the look-forward pipeline g(f(x_elq; c); Y(.)) per test pair.
std::vector<Tensor> restore_decomposed(const models::ResidualNet& f, const models::ResidualNet& g,
                                       const std::vector<Pair>& test, const models::FeatureExtractor& y,
                                       int lfo_iters);

std::vector<Tensor> hq_of(const std::vector<Pair>& pairs);

/// Rows: "direct" (lfo 0), then "decomposed" for each entry of lfo_iters.
std::vector<MetricsRow> run_comparison(const models::ResidualNet& direct, const models::ResidualNet& f,
                                       const models::ResidualNet& g, const std::vector<Pair>& test,
                                       const models::FeatureExtractor& y, const std::vector<int>& lfo_iters,
                                       double blur_tau);

/// Mean cosine(c^(i), Y(z_hq)) over the test set for i = 1 .. iterations + 1.
std::vector<double> lfo_condition_alignment(const models::ResidualNet& f, const models::ResidualNet& g,
                                            const std::vector<Pair>& test, const models::FeatureExtractor& y,
                                            int iterations);

struct PlugAndPlayReport {
  /// "alt_direct" = g'(x_elq), "alt_projected" = g'(f(x_elq)).
  std::vector<MetricsRow> rows;
  std::vector<std::string> warnings;
};

/// Swaps in an independently trained restorer g' without retraining f.
/// A warning is recorded when the LQ presets f and g' were trained on differ.
PlugAndPlayReport plug_and_play_eval(const models::ResidualNet& f, const models::ResidualNet& g_alt,
                                     const std::vector<Pair>& test, const models::FeatureExtractor& y,
                                     const degrade::DegradationPreset& projector_lq,
                                     const degrade::DegradationPreset& alt_lq, double blur_tau);

struct AblationRow {
  double lambda_blur = 0.0;
  MetricsRow metrics;
};

/// Trains one projector per lambda_blur (everything else fixed) and scores the
/// decomposed pipeline without look-forward. `reuse` may supply an already
/// trained projector for `reuse_lambda`.
std::vector<AblationRow> ablate_lambda_blur(const ExperimentConfig& cfg, const std::vector<Pair>& train,
                                            const std::vector<Pair>& test, const models::ResidualNet& g,
                                            const models::PriorScore& prior, const models::FeatureExtractor& y,
                                            std::uint64_t seed, const models::ResidualNet* reuse = nullptr,
                                            double reuse_lambda = -1.0);

std::string ablation_csv(const std::vector<AblationRow>& rows);
/// Scatter of PSNR against the perceptual proxy, one labelled point per
/// lambda_blur.
std::string ablation_svg(const std::vector<AblationRow>& rows);

}  // namespace irib::harness
