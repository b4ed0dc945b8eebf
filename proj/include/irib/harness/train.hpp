#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "irib/harness/config.hpp"
#include "irib/harness/data.hpp"
#include "irib/losses/training_losses.hpp"
#include "irib/models/features.hpp"
#include "irib/models/network.hpp"
#include "irib/models/prior.hpp"

namespace irib::harness {

/// Thrown when a loss turns non-finite. The model passed to the trainer is
/// left at its last good parameters.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

models::NetConfig network_config(const ArchConfig& arch, std::uint64_t init_seed, bool residual = true);

/// Called after every optimizer step with the number of completed steps.
using StepCallback = std::function<void(std::size_t, const models::ResidualNet&)>;

struct RestorerResult {
  models::ResidualNet net;
  /// Mean batch loss per step.
  std::vector<double> loss_curve;
};

/// Stage 1: fits g(x_lq; Y(x_lq)) to z_hq with lambda_l2 * MSE + lambda_blur *
/// blurred MSE. Each step degrades its HQ images with freshly sampled LQ
/// manifests. Zero steps return the identity-initialized network.
RestorerResult train_restorer(const ExperimentConfig& cfg, const std::vector<Tensor>& hq,
                              const models::FeatureExtractor& y, const ArchConfig& arch, std::uint64_t seed,
                              std::size_t steps, const StepCallback& on_step = {});

struct PriorResult {
  models::PriorScore prior;
  std::vector<double> loss_curve;
};

/// Denoising score matching on HQ images mapped to 2 z - 1.
PriorResult train_prior(const ExperimentConfig& cfg, const std::vector<Tensor>& hq, std::uint64_t seed,
                        std::size_t steps);

struct ProjectorOptions {
  double lambda_blur = 0.5;
  double dropout_p = 0.3;
  /// Appends one JSON record per step when non-empty.
  std::filesystem::path losses_jsonl;
  /// Written with the last good parameters if training diverges.
  std::filesystem::path last_good_checkpoint;
};

struct ProjectorResult {
  models::ResidualNet net;
  /// Noise predictor tracking the distribution of restored outputs.
  models::PriorScore student;
  std::vector<losses::LossReport> reports;
  /// Per step and batch item: whether the condition was dropped.
  std::vector<bool> dropped;
};

/// Stage 2: trains f with the full objective through the frozen restorer g.
ProjectorResult train_projector(const ExperimentConfig& cfg, const std::vector<Pair>& train,
                                const models::ResidualNet& g, const models::PriorScore& prior,
                                const models::FeatureExtractor& y, std::uint64_t seed, const ProjectorOptions& opts);

/// Baseline: one network of the projector's architecture mapping ELQ
/// straight to HQ, trained with the prior and HQ fidelity terms only, for
/// the same number of steps.
ProjectorResult train_direct(const ExperimentConfig& cfg, const std::vector<Pair>& train,
                             const models::PriorScore& prior, const models::FeatureExtractor& y, std::uint64_t seed,
                             const ProjectorOptions& opts);

/// Trailing moving average of `v` with the given window.
std::vector<double> moving_average(const std::vector<double>& v, std::size_t window);

}  // namespace irib::harness
