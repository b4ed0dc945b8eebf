#include "irib/harness/train.hpp"

#include <cmath>
#include <fstream>

#include "irib/harness/optim.hpp"
#include "irib/models/checkpoint.hpp"
#include "irib/numerics/ops.hpp"
#include "irib/numerics/rng.hpp"

namespace irib::harness {
namespace {

// Stream tags keep the per-purpose random streams independent.
enum Tag : std::uint64_t {
  kBatch = 101,
  kDropout = 102,
  kDegradeBack = 103,
  kPriorNoise = 104,
  kStudentNoise = 105,
  kPriorTrain = 106,
  kRestorerDegrade = 107,
};

std::size_t pick(std::size_t n, std::uint64_t seed, std::size_t step, std::size_t item) {
  Rng rng(derive_seed(derive_seed(seed, kBatch, step), item));
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
}

std::uint64_t stream(std::uint64_t seed, Tag tag, std::size_t step, std::size_t item) {
  return derive_seed(derive_seed(seed, tag, step), item);
}

void check_finite(double loss, std::size_t step, const char* stage) {
  if (!std::isfinite(loss)) {
    throw TrainingDiverged(std::string(stage) + ": non-finite loss at step " + std::to_string(step), step);
  }
}

// One denoising step of `score` on image `z` (in [0,1]); returns the loss.
double denoising_loss_into(models::PriorScore& score, const Tensor& z, std::uint64_t seed, double grad_scale) {
  const losses::NoiseDraw d = losses::draw_noise(z.shape(), score.schedule().size(), seed);
  Tape tape;
  Var z_t = models::noising(losses::to_prior_domain(Var::constant(z)), d.t, Var::constant(d.eps), score.schedule());
  Var loss = ops::mse(score.predict(z_t, d.t, tape), Var::constant(d.eps));
  tape.propagate(loss);
  tape.accumulate_into_parameters(grad_scale);
  return loss.value().item();
}

ProjectorResult train_stage2(const ExperimentConfig& cfg, const std::vector<Pair>& train, const models::ResidualNet* g,
                             const models::PriorScore& prior, const models::FeatureExtractor& y, std::uint64_t seed,
                             const ProjectorOptions& opts) {
  if (train.empty()) throw std::invalid_argument("train_projector: empty training set");
  ProjectorResult r{models::ResidualNet(network_config(cfg.network, derive_seed(seed, 1))), prior, {}, {}};
  losses::LossWeights w = cfg.weights;
  w.lambda_blur = opts.lambda_blur;
  w.validate();
  const degrade::DegradationPreset back = cfg.lq.differentiable();
  const losses::FrozenModels frozen{g, &prior, &r.student, &y};
  Optimizer opt(r.net.parameters(), cfg.optimizer);
  Optimizer student_opt(r.student.net().parameters(), cfg.optimizer);
  std::ofstream log;
  if (!opts.losses_jsonl.empty()) {
    log.open(opts.losses_jsonl);
    if (!log) throw std::runtime_error("cannot write " + opts.losses_jsonl.string());
  }
  const std::size_t batch = cfg.optimizer.batch;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t step = 0; step < cfg.steps.projector; ++step) {
    opt.zero_grad();
    losses::LossReport mean{};
    std::vector<Tensor> outputs;
    for (std::size_t i = 0; i < batch; ++i) {
      const Pair& p = train[pick(train.size(), seed, step, i)];
      const models::Condition c = models::extract_condition(y, p.x_elq);
      const models::Condition used = models::condition_dropout(c, opts.dropout_p, stream(seed, kDropout, step, i));
      r.dropped.push_back(used.is_null);
      const losses::LossItem item{p.x_elq, p.x_lq, p.z_hq, used,
                                  degrade::sample_manifest(back, stream(seed, kDegradeBack, step, i)),
                                  stream(seed, kPriorNoise, step, i)};
      Tape tape;
      const losses::LossEval e = losses::total_loss(item, r.net, frozen, w, tape);
      check_finite(e.report.total, step, g ? "train_projector" : "train_direct");
      tape.propagate(e.total);
      tape.accumulate_into_parameters(inv_b);
      outputs.push_back(e.z_hat.value());
      mean.lq_recon += e.report.lq_recon * inv_b;
      mean.hq_prior += e.report.hq_prior * inv_b;
      mean.hq_fid_l2 += e.report.hq_fid_l2 * inv_b;
      mean.hq_fid_perc += e.report.hq_fid_perc * inv_b;
      mean.hq_fid_blur += e.report.hq_fid_blur * inv_b;
      mean.total += e.report.total * inv_b;
    }
    const std::vector<Parameter> last_good = r.net.parameters();
    opt.step();
    bool finite = true;
    for (const auto& p : r.net.parameters()) finite = finite && p.value.all_finite();
    if (!finite) {
      models::assign_parameters(r.net.parameters(), last_good);
      if (!opts.last_good_checkpoint.empty()) models::save_network(opts.last_good_checkpoint, g ? "projector" : "direct", r.net);
      throw TrainingDiverged("projector parameters became non-finite at step " + std::to_string(step), step);
    }
    // The student follows the current output distribution.
    student_opt.zero_grad();
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      denoising_loss_into(r.student, outputs[i], stream(seed, kStudentNoise, step, i), inv_b);
    }
    student_opt.step();
    r.reports.push_back(mean);
    if (log) log << losses::to_json(mean, step).dump() << '\n';
  }
  return r;
}

}  // namespace

models::NetConfig network_config(const ArchConfig& arch, std::uint64_t init_seed, bool residual) {
  models::NetConfig c;
  c.width = arch.width;
  c.blocks = arch.blocks;
  c.residual_output = residual;
  c.init_seed = init_seed;
  return c;
}

RestorerResult train_restorer(const ExperimentConfig& cfg, const std::vector<Tensor>& hq,
                              const models::FeatureExtractor& y, const ArchConfig& arch, std::uint64_t seed,
                              std::size_t steps, const StepCallback& on_step) {
  if (hq.empty()) throw std::invalid_argument("train_restorer: empty training set");
  RestorerResult r{models::ResidualNet(network_config(arch, derive_seed(seed, 1))), {}};
  losses::LossWeights w = cfg.weights;
  w.lambda_perc = 0.0;
  Optimizer opt(r.net.parameters(), cfg.optimizer);
  const std::size_t batch = cfg.optimizer.batch;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t step = 0; step < steps; ++step) {
    opt.zero_grad();
    double mean = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      const Tensor& z = hq[pick(hq.size(), seed, step, i)];
      const Tensor x_lq =
          degrade::apply_manifest(degrade::sample_manifest(cfg.lq, stream(seed, kRestorerDegrade, step, i)), z);
      Tape tape;
      Var out = r.net.forward(Var::constant(x_lq), models::extract_condition(y, x_lq).as_var(), tape);
      const auto t = losses::hq_fid_loss(out, z, y, w);
      Var loss = ops::add(t.l2, t.blur);
      check_finite(loss.value().item(), step, "train_restorer");
      tape.propagate(loss);
      tape.accumulate_into_parameters(inv_b);
      mean += loss.value().item() * inv_b;
    }
    opt.step();
    r.loss_curve.push_back(mean);
    if (on_step) on_step(step + 1, r.net);
  }
  return r;
}

PriorResult train_prior(const ExperimentConfig& cfg, const std::vector<Tensor>& hq, std::uint64_t seed,
                        std::size_t steps) {
  if (hq.empty()) throw std::invalid_argument("train_prior: empty corpus");
  models::NetConfig nc = models::PriorScore::default_config(derive_seed(seed, 1));
  nc.width = cfg.network.width;
  PriorResult r{models::PriorScore(nc), {}};
  Optimizer opt(r.prior.net().parameters(), cfg.optimizer);
  const std::size_t batch = cfg.optimizer.batch;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t step = 0; step < steps; ++step) {
    opt.zero_grad();
    double mean = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      const Tensor& z = hq[pick(hq.size(), seed, step, i)];
      const double l = denoising_loss_into(r.prior, z, stream(seed, kPriorTrain, step, i), inv_b);
      check_finite(l, step, "train_prior");
      mean += l * inv_b;
    }
    opt.step();
    r.loss_curve.push_back(mean);
  }
  return r;
}

ProjectorResult train_projector(const ExperimentConfig& cfg, const std::vector<Pair>& train,
                                const models::ResidualNet& g, const models::PriorScore& prior,
                                const models::FeatureExtractor& y, std::uint64_t seed, const ProjectorOptions& opts) {
  return train_stage2(cfg, train, &g, prior, y, seed, opts);
}

ProjectorResult train_direct(const ExperimentConfig& cfg, const std::vector<Pair>& train,
                             const models::PriorScore& prior, const models::FeatureExtractor& y, std::uint64_t seed,
                             const ProjectorOptions& opts) {
  return train_stage2(cfg, train, nullptr, prior, y, seed, opts);
}

std::vector<double> moving_average(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += v[i];
    if (i >= window) s -= v[i - window];
    out.push_back(s / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

}  // namespace irib::harness
