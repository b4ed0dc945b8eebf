#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "irib/degrade/degradation.hpp"
#include "irib/losses/training_losses.hpp"

namespace irib::harness {

struct OptimizerConfig {
  /// "sgd_momentum" or "adam". For Adam, `momentum` is the first-moment
  /// decay and `beta2` the second-moment decay.
  std::string algorithm = "sgd_momentum";
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta2 = 0.999;
  double clip_norm = 1.0;
  std::size_t batch = 4;
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct StepBudget {
  std::size_t restorer = 2000;
  std::size_t prior = 1000;
  /// Shared by the projector and the direct baseline so both arms get the
  /// same number of optimizer steps.
  std::size_t projector = 1000;
  friend bool operator==(const StepBudget&, const StepBudget&) = default;
};

struct ArchConfig {
  std::size_t width = 16;
  std::size_t blocks = 4;
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct ExperimentConfig {
  std::uint64_t run_seed = 1;
  std::size_t image_size = 64;
  std::size_t train_size = 200;
  std::size_t test_size = 64;
  OptimizerConfig optimizer;
  StepBudget steps;
  losses::LossWeights weights;
  degrade::DegradationPreset lq = degrade::DegradationPreset::lq();
  degrade::DegradationPreset elq = degrade::DegradationPreset::elq();
  double prompt_dropout_p = 0.3;
  std::vector<int> lfo_iters{0, 1, 2};
  std::vector<double> lambda_blur_grid{0.0, 0.5, 1.0, 2.0};
  ArchConfig network;
  /// Independently trained restorer for the plug-and-play evaluation.
  ArchConfig alt_restorer{24, 3};
  std::uint64_t feature_seed = 0x5eed'f00d;

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::ordered_json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);

/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& c, const std::filesystem::path& path);

/// Applies IRIB_SEED when set.
void apply_environment(ExperimentConfig& c);

/// IRIB_THREADS when set (>= 1), else the hardware concurrency.
std::size_t thread_limit();

}  // namespace irib::harness
