#include "irib/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <optional>

#include <json.hpp>

#include "irib/degrade/serialize.hpp"
#include "irib/harness/io.hpp"
#include "irib/harness/metrics.hpp"
#include "irib/harness/parallel.hpp"
#include "irib/models/checkpoint.hpp"

namespace irib::harness {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

models::ResidualNet require_network(const fs::path& path, const std::string& kind) {
  if (!fs::exists(path)) throw std::runtime_error("missing checkpoint " + path.string());
  return models::load_network(path, kind);
}

models::PriorScore require_prior(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing checkpoint " + path.string());
  return models::load_prior(path);
}

std::string index_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

ProjectorOptions projector_options(const ExperimentConfig& cfg, const fs::path& log, const fs::path& last_good) {
  ProjectorOptions o;
  o.lambda_blur = cfg.weights.lambda_blur;
  o.dropout_p = cfg.prompt_dropout_p;
  o.losses_jsonl = log;
  o.last_good_checkpoint = last_good;
  return o;
}

}  // namespace

void RunPaths::create() const {
  for (const auto& d : {root, checkpoints(), manifests(), images() / "elq", images() / "lq", images() / "hq",
                        images() / "restored"}) {
    fs::create_directories(d);
  }
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, StageSeed s) {
  return derive_seed(cfg.run_seed, 0x5747e, static_cast<std::uint64_t>(s));
}

Corpus build_corpus(const ExperimentConfig& cfg) {
  cfg.validate();
  Corpus c;
  c.train_hq = synth_dataset(cfg.train_size, cfg.image_size, stage_seed(cfg, StageSeed::kTrainCorpus));
  c.test_hq = synth_dataset(cfg.test_size, cfg.image_size, stage_seed(cfg, StageSeed::kTestCorpus));
  c.train = make_pairs(c.train_hq, cfg.lq, cfg.elq, stage_seed(cfg, StageSeed::kTrainPairs));
  c.test = make_pairs(c.test_hq, cfg.lq, cfg.elq, stage_seed(cfg, StageSeed::kTestPairs));
  return c;
}

RestorerGain restorer_gain(const models::ResidualNet& g, const std::vector<Pair>& test,
                           const models::FeatureExtractor& y) {
  const auto gains = parallel_map<double>(test.size(), thread_limit(), [&](std::size_t i) {
    const Pair& p = test[i];
    const Tensor out = g.forward(Var::constant(p.x_lq), models::extract_condition(y, p.x_lq).as_var()).value();
    return psnr(out, p.z_hq) - psnr(p.x_lq, p.z_hq);
  });
  RestorerGain r;
  for (double d : gains) {
    r.mean_db += d / static_cast<double>(gains.size());
    if (d > 0.0) r.fraction_improved += 1.0 / static_cast<double>(gains.size());
  }
  return r;
}

double stage_train_restorer(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths) {
  const auto t0 = Clock::now();
  const models::FeatureExtractor y(cfg.feature_seed);
  const RestorerResult r = train_restorer(cfg, corpus.train_hq, y, cfg.network,
                                          stage_seed(cfg, StageSeed::kRestorer), cfg.steps.restorer);
  models::save_network(paths.restorer(), "restorer", r.net);
  return seconds_since(t0);
}

double stage_train_prior(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths) {
  const auto t0 = Clock::now();
  const PriorResult r = train_prior(cfg, corpus.train_hq, stage_seed(cfg, StageSeed::kPrior), cfg.steps.prior);
  models::save_prior(paths.prior(), r.prior);
  return seconds_since(t0);
}

double stage_train_projector(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths) {
  const auto t0 = Clock::now();
  const models::FeatureExtractor y(cfg.feature_seed);
  const models::ResidualNet g = require_network(paths.restorer(), "restorer");
  const models::PriorScore prior = require_prior(paths.prior());
  const ProjectorResult r = train_projector(cfg, corpus.train, g, prior, y, stage_seed(cfg, StageSeed::kProjector),
                                            projector_options(cfg, paths.losses(), paths.projector()));
  models::save_network(paths.projector(), "projector", r.net);
  return seconds_since(t0);
}

double stage_train_direct(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths) {
  const auto t0 = Clock::now();
  const models::FeatureExtractor y(cfg.feature_seed);
  const models::PriorScore prior = require_prior(paths.prior());
  const ProjectorResult r = train_direct(cfg, corpus.train, prior, y, stage_seed(cfg, StageSeed::kDirect),
                                         projector_options(cfg, paths.direct_losses(), paths.direct()));
  models::save_network(paths.direct(), "direct", r.net);
  return seconds_since(t0);
}

std::vector<MetricsRow> stage_evaluate(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths,
                                       bool write_images) {
  const models::FeatureExtractor y(cfg.feature_seed);
  const models::ResidualNet g = require_network(paths.restorer(), "restorer");
  const models::ResidualNet f = require_network(paths.projector(), "projector");
  const models::ResidualNet direct = require_network(paths.direct(), "direct");
  const auto rows = run_comparison(direct, f, g, corpus.test, y, cfg.lfo_iters, cfg.weights.tau);
  write_metrics_csv(paths.metrics(), rows);
  if (write_images) {
    const std::vector<Tensor> restored = restore_decomposed(f, g, corpus.test, y, 0);
    for (std::size_t i = 0; i < corpus.test.size(); ++i) {
      const std::string name = index_name(i);
      const Pair& p = corpus.test[i];
      write_png(paths.images() / "elq" / (name + ".png"), p.x_elq);
      write_png(paths.images() / "lq" / (name + ".png"), p.x_lq);
      write_png(paths.images() / "hq" / (name + ".png"), p.z_hq);
      write_png(paths.images() / "restored" / (name + ".png"), restored[i]);
      degrade::save_manifest(p.lq_manifest, paths.manifests() / (name + "_lq.json"));
      degrade::save_manifest(p.elq_manifest, paths.manifests() / (name + "_elq.json"));
    }
  }
  return rows;
}

std::vector<AblationRow> stage_ablation(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths) {
  const models::FeatureExtractor y(cfg.feature_seed);
  const models::ResidualNet g = require_network(paths.restorer(), "restorer");
  const models::PriorScore prior = require_prior(paths.prior());
  // The main projector differs from the ablation arm at the configured
  // lambda only by name, so it is reused when present.
  std::optional<models::ResidualNet> main;
  if (fs::exists(paths.projector())) main = models::load_network(paths.projector(), "projector");
  const auto rows = ablate_lambda_blur(cfg, corpus.train, corpus.test, g, prior, y,
                                       stage_seed(cfg, StageSeed::kProjector), main ? &*main : nullptr,
                                       cfg.weights.lambda_blur);
  write_text(paths.ablation_csv(), ablation_csv(rows));
  write_text(paths.ablation_svg(), ablation_svg(rows));
  return rows;
}

PlugAndPlayReport stage_plug_and_play(const ExperimentConfig& cfg, const Corpus& corpus, const RunPaths& paths) {
  const models::FeatureExtractor y(cfg.feature_seed);
  if (!fs::exists(paths.alt_restorer())) {
    const RestorerResult r = train_restorer(cfg, corpus.train_hq, y, cfg.alt_restorer,
                                            stage_seed(cfg, StageSeed::kAltRestorer), cfg.steps.restorer);
    models::save_network(paths.alt_restorer(), "restorer", r.net);
  }
  const models::ResidualNet f = require_network(paths.projector(), "projector");
  const models::ResidualNet g_alt = require_network(paths.alt_restorer(), "restorer");
  PlugAndPlayReport r = plug_and_play_eval(f, g_alt, corpus.test, y, cfg.lq, cfg.lq, cfg.weights.tau);
  write_metrics_csv(paths.plug_and_play(), r.rows);
  return r;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const fs::path& out, const PipelineOptions& opts) {
  const auto t0 = Clock::now();
  const RunPaths paths{out};
  paths.create();
  save_config(cfg, paths.config());
  const Corpus corpus = build_corpus(cfg);
  const models::FeatureExtractor y(cfg.feature_seed);

  PipelineResult res;
  res.restorer_seconds = stage_train_restorer(cfg, corpus, paths);
  stage_train_prior(cfg, corpus, paths);
  stage_train_projector(cfg, corpus, paths);
  stage_train_direct(cfg, corpus, paths);
  res.comparison = stage_evaluate(cfg, corpus, paths, opts.write_images);

  const models::ResidualNet g = models::load_network(paths.restorer(), "restorer");
  const models::ResidualNet f = models::load_network(paths.projector(), "projector");
  res.restorer = restorer_gain(g, corpus.test, y);
  const int max_iter = cfg.lfo_iters.empty() ? 1 : std::max(1, *std::max_element(cfg.lfo_iters.begin(), cfg.lfo_iters.end()));
  res.lfo_alignment = lfo_condition_alignment(f, g, corpus.test, y, max_iter);
  res.projector_params = f.parameter_count();
  res.direct_params = models::load_network(paths.direct(), "direct").parameter_count();

  if (opts.ablation) res.ablation = stage_ablation(cfg, corpus, paths);
  if (opts.plug_and_play) res.plug_and_play = stage_plug_and_play(cfg, corpus, paths);
  res.total_seconds = seconds_since(t0);

  nlohmann::ordered_json h;
  h["budget"] = {{"projector_steps", cfg.steps.projector},
                 {"direct_steps", cfg.steps.projector},
                 {"projector_params", res.projector_params},
                 {"direct_params", res.direct_params}};
  h["restorer"] = {{"steps", cfg.steps.restorer},
                   {"heldout_psnr_gain_db", res.restorer.mean_db},
                   {"fraction_improved", res.restorer.fraction_improved}};
  h["lfo_condition_alignment"] = res.lfo_alignment;
  h["plug_and_play_warnings"] = res.plug_and_play.warnings;
  h["seconds"] = {{"restorer", res.restorer_seconds}, {"total", res.total_seconds}};
  write_text(paths.header(), h.dump(2) + "\n");
  return res;
}

}  // namespace irib::harness
