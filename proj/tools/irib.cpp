// Command-line front end: one subcommand per pipeline stage plus `run` for
// the whole pipeline. Stage subcommands share a run directory.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "irib/degrade/serialize.hpp"
#include "irib/harness/config.hpp"
#include "irib/harness/data.hpp"
#include "irib/harness/evaluate.hpp"
#include "irib/harness/io.hpp"
#include "irib/harness/pipeline.hpp"
#include "irib/harness/train.hpp"
#include "irib/lfo/lfo.hpp"
#include "irib/models/checkpoint.hpp"
#include "irib/numerics/rng.hpp"

using namespace irib;
using namespace irib::harness;
namespace fs = std::filesystem;

namespace {

std::string index_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

// --config wins, then the run directory's snapshot, then the defaults.
ExperimentConfig resolve_config(const std::string& config, const fs::path& run) {
  ExperimentConfig cfg;
  if (!config.empty()) {
    cfg = load_config(config);
  } else if (!run.empty() && fs::exists(RunPaths{run}.config())) {
    cfg = load_config(RunPaths{run}.config());
  }
  apply_environment(cfg);
  return cfg;
}

std::vector<fs::path> png_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error("no .png files in " + dir.string());
  return out;
}

void print_rows(const std::vector<MetricsRow>& rows) {
  std::printf("%-16s %4s %9s %8s %11s %11s %11s\n", "method", "lfo", "psnr", "ssim", "blur_mse", "perc_proxy",
              "fid_proxy");
  for (const auto& r : rows) {
    std::printf("%-16s %4d %9.4f %8.5f %11.6f %11.6f %11.6f\n", r.method.c_str(), r.lfo, r.psnr, r.ssim, r.blur_mse,
                r.perc_proxy, r.fid_proxy);
  }
}

struct RunArgs {
  std::string config;
  std::string run = "run";
};

void add_run_args(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--run", a.run, "Run directory")->capture_default_str();
}

struct Stage {
  ExperimentConfig cfg;
  RunPaths paths;
  Corpus corpus;
};

Stage open_stage(const RunArgs& a) {
  Stage s{resolve_config(a.config, a.run), RunPaths{a.run}, {}};
  s.paths.create();
  if (!a.config.empty() || !fs::exists(s.paths.config())) save_config(s.cfg, s.paths.config());
  s.corpus = build_corpus(s.cfg);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decomposed restoration of extremely degraded images"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write procedural HQ images as PNG");
  std::size_t synth_n = 16, synth_size = 64;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth->add_option("--n", synth_n, "Number of images")->capture_default_str();
  synth->add_option("--size", synth_size, "Image side in pixels")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Corpus seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // degrade
  auto* degrade_cmd = app.add_subcommand("degrade", "Degrade every PNG in a directory");
  std::string preset_name, degrade_in, degrade_out, manifest_out;
  std::uint64_t degrade_seed = 0;
  degrade_cmd->add_option("--preset", preset_name, "Preset")->required()->check(CLI::IsMember({"lq", "elq"}));
  degrade_cmd->add_option("--seed", degrade_seed, "Seed; image i uses derive_seed(seed, i)")->required();
  degrade_cmd->add_option("--in", degrade_in, "Input directory")->required()->check(CLI::ExistingDirectory);
  degrade_cmd->add_option("--out", degrade_out, "Output directory")->required();
  degrade_cmd->add_option("--manifest-out", manifest_out, "Manifest directory")->required();

  RunArgs restorer_args, projector_args, direct_args, eval_args, ablate_args, pnp_args, full_args;
  auto* train_restorer_cmd = app.add_subcommand("train-restorer", "Train the restorer and the HQ prior");
  add_run_args(train_restorer_cmd, restorer_args);
  auto* train_projector_cmd = app.add_subcommand("train-projector", "Train the projector against the frozen restorer");
  add_run_args(train_projector_cmd, projector_args);
  auto* train_direct_cmd = app.add_subcommand("train-direct", "Train the direct ELQ to HQ baseline");
  add_run_args(train_direct_cmd, direct_args);
  auto* eval_cmd = app.add_subcommand("eval", "Write metrics.csv, test images and manifests");
  add_run_args(eval_cmd, eval_args);
  bool no_images = false;
  eval_cmd->add_flag("--no-images", no_images, "Skip the image and manifest dump");
  auto* ablate_cmd = app.add_subcommand("ablate-blur", "Sweep lambda_blur over {0, 0.5, 1, 2}");
  add_run_args(ablate_cmd, ablate_args);
  auto* pnp_cmd = app.add_subcommand("plug-and-play", "Evaluate an independently trained restorer behind the projector");
  add_run_args(pnp_cmd, pnp_args);

  // lfo
  auto* lfo_cmd = app.add_subcommand("lfo", "Restore one image with look-forward refinement");
  std::string lfo_in, lfo_proj, lfo_rest, lfo_dump, lfo_out;
  int lfo_iters = 1;
  std::uint64_t feature_seed = models::FeatureExtractor::kDefaultSeed;
  lfo_cmd->add_option("--in", lfo_in, "ELQ input PNG")->required()->check(CLI::ExistingFile);
  lfo_cmd->add_option("--iters", lfo_iters, "Refinement iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
  lfo_cmd->add_option("--ckpt-projector", lfo_proj, "Projector checkpoint")->required()->check(CLI::ExistingFile);
  lfo_cmd->add_option("--ckpt-restorer", lfo_rest, "Restorer checkpoint")->required()->check(CLI::ExistingFile);
  lfo_cmd->add_option("--dump-trace", lfo_dump, "Write every condition (JSON) and LQ proxy (PNG) here");
  lfo_cmd->add_option("--out", lfo_out, "Final HQ PNG");
  lfo_cmd->add_option("--feature-seed", feature_seed, "Feature extractor seed")->capture_default_str();

  // report
  auto* report_cmd = app.add_subcommand("report", "Summarise the artifacts of a run directory");
  std::string report_run = "run";
  report_cmd->add_option("--run", report_run, "Run directory")->capture_default_str()->check(CLI::ExistingDirectory);

  // config
  auto* config_cmd = app.add_subcommand("config", "Print the effective configuration (defaults, file, environment)");
  std::string config_in;
  config_cmd->add_option("--config", config_in, "Experiment config (JSON)")->check(CLI::ExistingFile);

  // run
  auto* run_cmd = app.add_subcommand("run", "Every stage in order, then run_header.json");
  add_run_args(run_cmd, full_args);
  bool with_ablation = false, with_pnp = false;
  run_cmd->add_flag("--ablation", with_ablation, "Also run the lambda_blur sweep");
  run_cmd->add_flag("--plug-and-play", with_pnp, "Also run the plug-and-play evaluation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      fs::create_directories(synth_out);
      const auto imgs = synth_dataset(synth_n, synth_size, synth_seed);
      for (std::size_t i = 0; i < imgs.size(); ++i) write_png(fs::path(synth_out) / (index_name(i) + ".png"), imgs[i]);
      std::cout << "wrote " << imgs.size() << " images to " << synth_out << "\n";
    } else if (*degrade_cmd) {
      const auto preset = degrade::preset_by_name(preset_name);
      fs::create_directories(degrade_out);
      fs::create_directories(manifest_out);
      const auto files = png_files(degrade_in);
      for (std::size_t i = 0; i < files.size(); ++i) {
        const auto m = degrade::sample_manifest(preset, derive_seed(degrade_seed, i));
        const std::string stem = files[i].stem().string();
        write_png(fs::path(degrade_out) / (stem + ".png"), degrade::apply_manifest(m, read_png(files[i])));
        degrade::save_manifest(m, fs::path(manifest_out) / (stem + ".json"));
      }
      std::cout << "degraded " << files.size() << " images with preset " << preset_name << "\n";
    } else if (*train_restorer_cmd) {
      const Stage s = open_stage(restorer_args);
      const double t = stage_train_restorer(s.cfg, s.corpus, s.paths);
      const double tp = stage_train_prior(s.cfg, s.corpus, s.paths);
      const auto gain = restorer_gain(models::load_network(s.paths.restorer(), "restorer"), s.corpus.test,
                                      models::FeatureExtractor(s.cfg.feature_seed));
      std::printf("restorer: %.1f s, held-out gain %+.3f dB (%.0f%% of items improved)\nprior: %.1f s\n", t,
                  gain.mean_db, 100.0 * gain.fraction_improved, tp);
    } else if (*train_projector_cmd) {
      const Stage s = open_stage(projector_args);
      std::printf("projector: %.1f s\n", stage_train_projector(s.cfg, s.corpus, s.paths));
    } else if (*train_direct_cmd) {
      const Stage s = open_stage(direct_args);
      std::printf("direct: %.1f s\n", stage_train_direct(s.cfg, s.corpus, s.paths));
    } else if (*eval_cmd) {
      const Stage s = open_stage(eval_args);
      print_rows(stage_evaluate(s.cfg, s.corpus, s.paths, !no_images));
    } else if (*ablate_cmd) {
      const Stage s = open_stage(ablate_args);
      std::cout << ablation_csv(stage_ablation(s.cfg, s.corpus, s.paths));
    } else if (*pnp_cmd) {
      const Stage s = open_stage(pnp_args);
      const auto r = stage_plug_and_play(s.cfg, s.corpus, s.paths);
      print_rows(r.rows);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    } else if (*lfo_cmd) {
      const auto f = models::load_network(lfo_proj, "projector");
      const auto g = models::load_network(lfo_rest, "restorer");
      const models::FeatureExtractor y(feature_seed);
      const auto trace = lfo::lfo_restore(read_png(lfo_in), f, g, y, lfo_iters);
      if (!lfo_dump.empty()) {
        const fs::path dir(lfo_dump);
        fs::create_directories(dir);
        for (std::size_t i = 0; i < trace.conditions.size(); ++i) {
          const auto& c = trace.conditions[i];
          nlohmann::ordered_json j;
          j["index"] = i + 1;
          j["null"] = c.is_null;
          j["vector"] = std::vector<double>(c.vector.data().begin(), c.vector.data().end());
          write_text(dir / ("condition_" + std::to_string(i + 1) + ".json"), j.dump() + "\n");
          write_png(dir / ("lq_proxy_" + std::to_string(i + 1) + ".png"), trace.lq_proxies[i]);
        }
        write_png(dir / "final.png", trace.final_hq);
      }
      if (!lfo_out.empty()) write_png(lfo_out, trace.final_hq);
      std::cout << "lfo: " << trace.conditions.size() << " conditions\n";
    } else if (*report_cmd) {
      const RunPaths p{report_run};
      if (fs::exists(p.header())) std::cout << read_text(p.header());
      if (fs::exists(p.metrics())) {
        std::cout << "\ncomparison\n";
        print_rows(read_metrics_csv(p.metrics()));
      }
      if (fs::exists(p.plug_and_play())) {
        std::cout << "\nplug-and-play\n";
        print_rows(read_metrics_csv(p.plug_and_play()));
      }
      if (fs::exists(p.ablation_csv())) std::cout << "\nablation\n" << read_text(p.ablation_csv());
    } else if (*config_cmd) {
      std::cout << to_json(resolve_config(config_in, {})).dump(2) << "\n";
    } else if (*run_cmd) {
      const ExperimentConfig cfg = resolve_config(full_args.config, {});
      PipelineOptions opts;
      opts.ablation = with_ablation;
      opts.plug_and_play = with_pnp;
      const auto r = run_pipeline(cfg, full_args.run, opts);
      print_rows(r.comparison);
      std::printf("restorer gain %+.3f dB, total %.1f s\n", r.restorer.mean_db, r.total_seconds);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
