#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "irib/numerics/autodiff.hpp"

// Information-bottleneck objectives on small, fully enumerable instances.
namespace irib::losses {

/// p(x, y) as an |X| x |Y| matrix summing to 1, and an encoder q(z | x) as a
/// row-stochastic |X| x |Z| matrix.
struct DiscreteJoint {
  Eigen::MatrixXd p;
  Eigen::MatrixXd encoder;

  void validate() const;
  /// Random instance with the given alphabet sizes.
  static DiscreteJoint random(std::size_t nx, std::size_t ny, std::size_t nz, std::uint64_t seed);

  Eigen::VectorXd px() const;
  Eigen::VectorXd py() const;
  /// Marginal p(z) = sum_x p(x) q(z | x).
  Eigen::VectorXd pz() const;
  /// p(z, y) under the chain Y - X - Z, |Z| x |Y|.
  Eigen::MatrixXd pzy() const;
  /// Exact posterior p(y | z), row-stochastic |Z| x |Y|.
  Eigen::MatrixXd posterior_y_given_z() const;
};

/// Random point on the simplex (Dirichlet(1)).
Eigen::VectorXd random_simplex(std::size_t n, std::uint64_t seed);

double entropy(const Eigen::VectorXd& p);

/// Exact expectation of
///   E_{p(x,y)} [ E_{q(z|x)}[-log decoder(y|z)] + beta KL(q(.|x) || r) ].
double vib_loss_discrete(const DiscreteJoint& joint, const Eigen::MatrixXd& decoder, const Eigen::VectorXd& r,
                         double beta);

struct IbBounds {
  double ixz;        // exact I(X;Z)
  double ixz_upper;  // E_p(x) KL(q(z|x) || r)
  double izy;        // exact I(Z;Y)
  double izy_lower;  // E[log decoder(y|z)] + H(Y)
  double hy;         // H(Y)
};

/// All four quantities by enumeration. The decoder defaults to the exact
/// posterior p(y | z), which makes the lower bound tight.
IbBounds ib_bound_check(const DiscreteJoint& joint, const Eigen::VectorXd& r,
                        const std::optional<Eigen::MatrixXd>& decoder = std::nullopt);

/// KL( N(mu, diag(sigma^2)) || N(0, I) ).
double kl_diag_gaussian(const std::vector<double>& mu, const std::vector<double>& sigma);

/// Linear diagonal-Gaussian encoder and linear unit-variance Gaussian decoder.
/// Vars let callers bind them as tape leaves or constants.
struct VaeVars {
  Var enc_mu_w;      // [L, D]
  Var enc_mu_b;      // [L]
  Var enc_logsig_w;  // [L, D]
  Var enc_logsig_b;  // [L]
  Var dec_w;         // [D, L]
  Var dec_b;         // [D]
};

/// Single-sample reparameterized estimate of
///   mean_x [ -log N(x; dec(z), I) + beta KL(q(z|x) || N(0, I)) ],
/// z = mu(x) + sigma(x) * eps with eps drawn from `seed`. data is [N, D].
Var beta_vae_loss_gaussian(const Tensor& data, const VaeVars& vars, double beta, std::uint64_t seed);

}  // namespace irib::losses
