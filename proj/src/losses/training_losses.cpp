#include "irib/losses/training_losses.hpp"

#include <cmath>
#include <stdexcept>

#include "irib/numerics/ops.hpp"
#include "irib/numerics/rng.hpp"

namespace irib::losses {
namespace {

using json = nlohmann::ordered_json;

void require_finite_nonneg(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument(std::string("LossWeights: ") + name + " must be finite and >= 0");
}

Var blurred(const Var& x, const Tensor& kernel) {
  return kernel.size() == 1 ? x : ops::blur_same(x, kernel);
}

}  // namespace

void LossWeights::validate() const {
  require_finite_nonneg(beta, "beta");
  require_finite_nonneg(tau, "tau");
  require_finite_nonneg(lambda_l2, "lambda_l2");
  require_finite_nonneg(lambda_perc, "lambda_perc");
  require_finite_nonneg(lambda_blur, "lambda_blur");
  if (!std::isfinite(sigma) || !(sigma > 0.0)) throw std::invalid_argument("LossWeights: sigma must be > 0");
  if (k % 2 == 0) throw std::invalid_argument("LossWeights: k must be odd");
}

json to_json(const LossWeights& w) {
  return json{{"beta", w.beta},           {"sigma", w.sigma},          {"tau", w.tau},
              {"k", w.k},                 {"lambda_l2", w.lambda_l2}, {"lambda_perc", w.lambda_perc},
              {"lambda_blur", w.lambda_blur}};
}

LossWeights loss_weights_from_json(const json& j) {
  LossWeights w;
  w.beta = j.at("beta").get<double>();
  w.sigma = j.at("sigma").get<double>();
  w.tau = j.at("tau").get<double>();
  w.k = j.at("k").get<std::size_t>();
  w.lambda_l2 = j.at("lambda_l2").get<double>();
  w.lambda_perc = j.at("lambda_perc").get<double>();
  w.lambda_blur = j.at("lambda_blur").get<double>();
  w.validate();
  return w;
}

json to_json(const LossReport& r, std::size_t step) {
  return json{{"step", step},           {"lq_recon", r.lq_recon},       {"hq_prior", r.hq_prior},
              {"hq_fid_l2", r.hq_fid_l2}, {"hq_fid_perc", r.hq_fid_perc}, {"hq_fid_blur", r.hq_fid_blur},
              {"total", r.total}};
}

Tensor lowpass_kernel(double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("lowpass_kernel: tau must be >= 0");
  if (tau == 0.0) return Tensor(Shape{1, 1}, 1.0);
  return gaussian_kernel2d(tau, static_cast<std::size_t>(std::ceil(3.0 * tau)));
}

Tensor hq_blur_kernel(std::size_t k) {
  if (k % 2 == 0) throw std::invalid_argument("hq_blur_kernel: k must be odd");
  if (k == 1) return Tensor(Shape{1, 1}, 1.0);
  return gaussian_kernel2d(static_cast<double>(k - 1) / 6.0, (k - 1) / 2);
}

Var lq_recon_blur_mse(const Var& z_hat, const Tensor& x_lq, const degrade::DegradationManifest& manifest,
                      const LossWeights& w) {
  Var x_tilde = degrade::apply_manifest(manifest, z_hat);
  if (x_tilde.shape() != x_lq.shape()) {
    throw ShapeError("lq_recon_blur_mse: degraded shape " + shape_to_string(x_tilde.shape()) + " vs x_lq " +
                     shape_to_string(x_lq.shape()));
  }
  const Tensor g = lowpass_kernel(w.tau);
  Var diff = ops::sub(blurred(x_tilde, g), blurred(Var::constant(x_lq), g));
  return ops::scale(ops::mean(ops::square(diff)), 1.0 / (2.0 * w.sigma * w.sigma));
}

Var to_prior_domain(const Var& z) { return ops::add_scalar(ops::scale(z, 2.0), -1.0); }

NoiseDraw draw_noise(const Shape& shape, std::size_t steps, std::uint64_t seed) {
  Rng rng(seed);
  NoiseDraw d{static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(steps) - 1)), Tensor(shape)};
  for (auto& v : d.eps.data()) v = rng.normal();
  return d;
}

Var hq_prior_loss(const Var& z_hat, const models::PriorScore& prior, const models::PriorScore& student,
                  std::uint64_t seed) {
  if (!(prior.schedule() == student.schedule())) {
    throw std::invalid_argument("hq_prior_loss: student and prior schedules differ");
  }
  const NoiseDraw d = draw_noise(z_hat.shape(), prior.schedule().size(), seed);
  Var z_t = models::noising(to_prior_domain(z_hat), d.t, Var::constant(d.eps), prior.schedule());
  Var diff = ops::sub(student.predict(z_t, d.t), prior.predict(z_t, d.t));
  return ops::scale(ops::mean(ops::square(diff)), 0.5);
}

Var perceptual_distance(const Var& a, const Var& b, const models::FeatureExtractor& features) {
  const auto fa = features.features(a);
  const auto fb = features.features(b);
  Var total;
  for (std::size_t l = 0; l < fa.maps.size(); ++l) {
    Var d = ops::mse(fa.maps[l], fb.maps[l]);
    total = l == 0 ? d : ops::add(total, d);
  }
  return total;
}

FidTerms hq_fid_loss(const Var& z_hat, const Tensor& z, const models::FeatureExtractor& features,
                     const LossWeights& w) {
  if (z_hat.shape() != z.shape()) {
    throw ShapeError("hq_fid_loss: shapes " + shape_to_string(z_hat.shape()) + " and " + shape_to_string(z.shape()));
  }
  w.validate();
  Var target = Var::constant(z);
  FidTerms t;
  t.l2 = ops::scale(ops::mse(z_hat, target), w.lambda_l2);
  t.perc = w.lambda_perc == 0.0 ? Var::constant(Tensor::scalar(0.0))
                                : ops::scale(perceptual_distance(z_hat, target, features), w.lambda_perc);
  if (w.lambda_blur == 0.0) {
    t.blur = Var::constant(Tensor::scalar(0.0));
  } else {
    const Tensor g = hq_blur_kernel(w.k);
    t.blur = ops::scale(ops::mse(blurred(z_hat, g), blurred(target, g)), w.lambda_blur);
  }
  return t;
}

LossEval total_loss(const LossItem& item, models::ResidualNet& trainable, const FrozenModels& frozen,
                    const LossWeights& w, Tape& tape) {
  if (!frozen.prior || !frozen.student || !frozen.features) {
    throw std::invalid_argument("total_loss: prior, student and feature extractor are required");
  }
  if (item.x_elq.shape() != item.z_hq.shape() || item.x_lq.shape() != item.z_hq.shape()) {
    throw ShapeError("total_loss: unpaired item, shapes " + shape_to_string(item.x_elq.shape()) + ", " +
                     shape_to_string(item.x_lq.shape()) + ", " + shape_to_string(item.z_hq.shape()));
  }
  w.validate();
  LossEval e;
  e.lq_proxy = trainable.forward(Var::constant(item.x_elq), item.condition.as_var(), tape);
  Var lq_recon;
  if (frozen.restorer) {
    e.z_hat = frozen.restorer->forward(e.lq_proxy, frozen.features->condition(e.lq_proxy));
    lq_recon = lq_recon_blur_mse(e.z_hat, item.x_lq, item.degrade_back, w);
  } else {
    e.z_hat = e.lq_proxy;
    lq_recon = Var::constant(Tensor::scalar(0.0));
  }
  Var prior = ops::scale(hq_prior_loss(e.z_hat, *frozen.prior, *frozen.student, item.noise_seed), w.beta);
  FidTerms fid = hq_fid_loss(e.z_hat, item.z_hq, *frozen.features, w);
  e.total = ops::add(ops::add(ops::add(lq_recon, prior), ops::add(fid.l2, fid.perc)), fid.blur);
  e.report.lq_recon = lq_recon.value().item();
  e.report.hq_prior = prior.value().item();
  e.report.hq_fid_l2 = fid.l2.value().item();
  e.report.hq_fid_perc = fid.perc.value().item();
  e.report.hq_fid_blur = fid.blur.value().item();
  e.report.total = e.total.value().item();
  return e;
}

}  // namespace irib::losses
