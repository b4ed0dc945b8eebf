#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "irib/harness/config.hpp"
#include "irib/harness/data.hpp"
#include "irib/harness/evaluate.hpp"

namespace irib::harness {

/// Output directory layout of one run.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path restorer() const { return checkpoints() / "restorer.ckpt"; }
  std::filesystem::path prior() const { return checkpoints() / "prior.ckpt"; }
  std::filesystem::path projector() const { return checkpoints() / "projector.ckpt"; }
  std::filesystem::path direct() const { return checkpoints() / "direct.ckpt"; }
  std::filesystem::path alt_restorer() const { return checkpoints() / "alt_restorer.ckpt"; }
  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path header() const { return root / "run_header.json"; }
  std::filesystem::path metrics() const { return root / "metrics.csv"; }
  std::filesystem::path losses() const { return root / "losses.jsonl"; }
  std::filesystem::path direct_losses() const { return root / "losses_direct.jsonl"; }
  std::filesystem::path ablation_csv() const { return root / "ablation.csv"; }
  std::filesystem::path ablation_svg() const { return root / "ablation.svg"; }
  std::filesystem::path plug_and_play() const { return root / "plug_and_play.csv"; }
  std::filesystem::path images() const { return root / "images"; }
  std::filesystem::path manifests() const { return root / "manifests"; }

  /// Creates the directory tree.
  void create() const;
};

/// Independent seeds of every pipeline stage, derived from run_seed.
enum class StageSeed : std::uint64_t {
  kTrainCorpus = 1,
  kTestCorpus,
  kTrainPairs,
  kTestPairs,
  kRestorer,
  kPrior,
  kProjector,
  kDirect,
  kAltRestorer,
};
std::uint64_t stage_seed(const ExperimentConfig& cfg, StageSeed s);

struct Corpus {
  std::vector<Tensor> train_hq;
  std::vector<Tensor> test_hq;
  std::vector<Pair> train;
  std::vector<Pair> test;
};
Corpus build_corpus(const ExperimentConfig& cfg);

/// Mean held-out PSNR(g(x_lq), z) - PSNR(x_lq, z) and the fraction of items
/// that improve.
struct RestorerGain {
  double mean_db = 0.0;
  double fraction_improved = 0.0;
};
RestorerGain restorer_gain(const models::ResidualNet& g, const std::vector<Pair>& test,
                           const models::FeatureExtractor& y);

/// Each stage reads the checkpoints it depends on from `paths` (a missing one
/// is an error) and writes its own. Stages return wall-clock seconds.
double stage_train_restorer(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths);
double stage_train_prior(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths);
double stage_train_projector(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths);
double stage_train_direct(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths);
/// Comparison grid to metrics.csv; optionally dumps test images and manifests.
std::vector<MetricsRow> stage_evaluate(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths,
                                       bool write_images);
std::vector<AblationRow> stage_ablation(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths);
/// Trains the alternative restorer unless its checkpoint already exists.
PlugAndPlayReport stage_plug_and_play(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths);

struct PipelineOptions {
  bool ablation = false;
  bool plug_and_play = false;
  bool write_images = true;
};

struct PipelineResult {
  std::vector<MetricsRow> comparison;
  std::vector<AblationRow> ablation;
  PlugAndPlayReport plug_and_play;
  /// Mean cosine(c^(i), Y(z_hq)) for i = 1 .. max(lfo_iters) + 1.
  std::vector<double> lfo_alignment;
  RestorerGain restorer;
  std::size_t projector_params = 0;
  std::size_t direct_params = 0;
  double restorer_seconds = 0.0;
  double total_seconds = 0.0;
};

/// Every stage in order, then run_header.json with the budget, the restorer
/// gate and the condition alignment.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out,
                            const PipelineOptions& opts = {});

}  // namespace irib::harness
