#include "irib/losses/ib_bounds.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "irib/numerics/ops.hpp"
#include "irib/numerics/rng.hpp"

namespace irib::losses {
namespace {

constexpr double kStochasticTol = 1e-9;

void require_row_stochastic(const Eigen::MatrixXd& m, const char* what) {
  if ((m.array() < 0.0).any()) throw std::invalid_argument(std::string(what) + " has negative entries");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (std::abs(m.row(i).sum() - 1.0) > kStochasticTol) {
      throw std::invalid_argument(std::string(what) + " row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

void require_simplex(const Eigen::VectorXd& v, const char* what) {
  if ((v.array() < 0.0).any() || std::abs(v.sum() - 1.0) > kStochasticTol) {
    throw std::invalid_argument(std::string(what) + " is not a probability vector");
  }
}

// 0 log 0 = 0; a positive mass on a zero-probability event is infinite.
double plogq(double p, double q) {
  if (p == 0.0) return 0.0;
  return p * std::log(q);
}

}  // namespace

void DiscreteJoint::validate() const {
  if (p.size() == 0 || encoder.size() == 0) throw std::invalid_argument("DiscreteJoint: empty");
  if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > kStochasticTol) {
    throw std::invalid_argument("DiscreteJoint: p(x,y) must be non-negative and sum to 1");
  }
  if (encoder.rows() != p.rows()) throw std::invalid_argument("DiscreteJoint: encoder rows must equal |X|");
  require_row_stochastic(encoder, "encoder");
}

Eigen::VectorXd random_simplex(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = -std::log(1.0 - rng.uniform());
  return v / v.sum();
}

DiscreteJoint DiscreteJoint::random(std::size_t nx, std::size_t ny, std::size_t nz, std::uint64_t seed) {
  DiscreteJoint j;
  const Eigen::VectorXd flat = random_simplex(nx * ny, derive_seed(seed, 0));
  j.p = Eigen::Map<const Eigen::MatrixXd>(flat.data(), static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
  j.encoder.resize(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nz));
  for (std::size_t x = 0; x < nx; ++x) j.encoder.row(static_cast<Eigen::Index>(x)) = random_simplex(nz, derive_seed(seed, 1, x));
  return j;
}

Eigen::VectorXd DiscreteJoint::px() const { return p.rowwise().sum(); }
Eigen::VectorXd DiscreteJoint::py() const { return p.colwise().sum().transpose(); }
Eigen::VectorXd DiscreteJoint::pz() const { return encoder.transpose() * px(); }
Eigen::MatrixXd DiscreteJoint::pzy() const { return encoder.transpose() * p; }

Eigen::MatrixXd DiscreteJoint::posterior_y_given_z() const {
  Eigen::MatrixXd post = pzy();
  for (Eigen::Index z = 0; z < post.rows(); ++z) {
    const double s = post.row(z).sum();
    if (s > 0.0) {
      post.row(z) /= s;
    } else {
      post.row(z).setConstant(1.0 / static_cast<double>(post.cols()));
    }
  }
  return post;
}

double entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) h -= plogq(p[i], p[i]);
  return h;
}

double vib_loss_discrete(const DiscreteJoint& joint, const Eigen::MatrixXd& decoder, const Eigen::VectorXd& r,
                         double beta) {
  joint.validate();
  require_row_stochastic(decoder, "decoder");
  require_simplex(r, "r");
  if (decoder.rows() != joint.encoder.cols() || decoder.cols() != joint.p.cols() || r.size() != joint.encoder.cols()) {
    throw std::invalid_argument("vib_loss_discrete: alphabet sizes disagree");
  }
  double recon = 0.0, kl = 0.0;
  const Eigen::VectorXd px = joint.px();
  for (Eigen::Index x = 0; x < joint.p.rows(); ++x) {
    for (Eigen::Index y = 0; y < joint.p.cols(); ++y)
      for (Eigen::Index z = 0; z < decoder.rows(); ++z) recon -= plogq(joint.p(x, y) * joint.encoder(x, z), decoder(z, y));
    for (Eigen::Index z = 0; z < decoder.rows(); ++z) {
      const double q = joint.encoder(x, z);
      kl += px[x] * (plogq(q, q) - plogq(q, r[z]));
    }
  }
  return recon + beta * kl;
}

IbBounds ib_bound_check(const DiscreteJoint& joint, const Eigen::VectorXd& r,
                        const std::optional<Eigen::MatrixXd>& decoder) {
  joint.validate();
  require_simplex(r, "r");
  const Eigen::MatrixXd dec = decoder ? *decoder : joint.posterior_y_given_z();
  require_row_stochastic(dec, "decoder");
  const Eigen::VectorXd px = joint.px(), py = joint.py(), pz = joint.pz();
  const Eigen::MatrixXd pzy = joint.pzy();
  IbBounds b{};
  b.hy = entropy(py);
  for (Eigen::Index x = 0; x < joint.p.rows(); ++x)
    for (Eigen::Index z = 0; z < pz.size(); ++z) {
      const double joint_xz = px[x] * joint.encoder(x, z);
      if (joint_xz == 0.0) continue;
      b.ixz += joint_xz * std::log(joint.encoder(x, z) / pz[z]);
      b.ixz_upper += joint_xz * std::log(joint.encoder(x, z) / r[z]);
    }
  for (Eigen::Index z = 0; z < pzy.rows(); ++z)
    for (Eigen::Index y = 0; y < pzy.cols(); ++y) {
      if (pzy(z, y) == 0.0) continue;
      b.izy += pzy(z, y) * std::log(pzy(z, y) / (pz[z] * py[y]));
      b.izy_lower += plogq(pzy(z, y), dec(z, y));
    }
  b.izy_lower += b.hy;
  return b;
}

double kl_diag_gaussian(const std::vector<double>& mu, const std::vector<double>& sigma) {
  if (mu.size() != sigma.size()) throw std::invalid_argument("kl_diag_gaussian: mu and sigma sizes differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw std::invalid_argument("kl_diag_gaussian: sigma must be positive");
    const double s2 = sigma[i] * sigma[i];
    kl += 0.5 * (mu[i] * mu[i] + s2 - 1.0 - std::log(s2));
  }
  return kl;
}

Var beta_vae_loss_gaussian(const Tensor& data, const VaeVars& v, double beta, std::uint64_t seed) {
  if (data.rank() != 2) throw ShapeError("beta_vae_loss_gaussian: data must be [N, D]");
  const std::size_t n = data.shape()[0], d = data.shape()[1];
  const std::size_t latent = v.enc_mu_w.shape()[0];
  Var x = Var::constant(data);
  Var mu = ops::linear(x, v.enc_mu_w, v.enc_mu_b);
  Var log_sigma = ops::linear(x, v.enc_logsig_w, v.enc_logsig_b);
  Var sigma = ops::exp(log_sigma);
  Tensor eps(Shape{n, latent});
  Rng rng(seed);
  for (auto& e : eps.data()) e = rng.normal();
  Var z = ops::add(mu, ops::mul(sigma, Var::constant(eps)));
  Var recon = ops::linear(z, v.dec_w, v.dec_b);
  // -log N(x; m, I) = 0.5 |x - m|^2 + 0.5 D log(2 pi)
  Var nll = ops::add_scalar(ops::scale(ops::sum(ops::square(ops::sub(x, recon))), 0.5 / static_cast<double>(n)),
                            0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
  // KL = 0.5 sum(mu^2 + sigma^2 - 1 - 2 log sigma)
  Var kl_terms = ops::sub(ops::add(ops::square(mu), ops::square(sigma)), ops::scale(log_sigma, 2.0));
  Var kl = ops::scale(ops::add_scalar(ops::sum(kl_terms), -static_cast<double>(n * latent)), 0.5 / static_cast<double>(n));
  return ops::add(nll, ops::scale(kl, beta));
}

}  // namespace irib::losses
