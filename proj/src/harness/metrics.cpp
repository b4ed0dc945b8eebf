#include "irib/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "irib/harness/config.hpp"
#include "irib/harness/parallel.hpp"
#include "irib/losses/training_losses.hpp"
#include "irib/numerics/ops.hpp"

namespace irib::harness {
namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
}

// Symmetric PSD square root via eigendecomposition; tiny negative
// eigenvalues from rounding are clipped to zero.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean) {
  const Eigen::MatrixXd c = x.rowwise() - mean;
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  return c.transpose() * c / denom;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
  require_same(a, b, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a, const Tensor& b) {
  require_same(a, b, "ssim");
  if (a.rank() != 4) throw ShapeError("ssim: expected NCHW");
  const std::size_t n = a.shape()[0], ch = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
  constexpr std::size_t kWin = 11;
  const std::size_t win = std::min({kWin, h, w});
  std::vector<double> g(win);
  double gs = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(win - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    gs += g[i];
  }
  for (auto& v : g) v /= gs;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t b0 = 0; b0 < n; ++b0)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t y = 0; y + win <= h; ++y)
        for (std::size_t x = 0; x + win <= w; ++x) {
          double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
          for (std::size_t i = 0; i < win; ++i)
            for (std::size_t j = 0; j < win; ++j) {
              const double wt = g[i] * g[j];
              const double va = a.at(b0, c, y + i, x + j), vb = b.at(b0, c, y + i, x + j);
              ma += wt * va;
              mb += wt * vb;
              saa += wt * va * va;
              sbb += wt * vb * vb;
              sab += wt * va * vb;
            }
          const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
          total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
          ++count;
        }
  return total / static_cast<double>(count);
}

double blur_mse(const Tensor& a, const Tensor& b, double tau) {
  require_same(a, b, "blur_mse");
  const Tensor k = losses::lowpass_kernel(tau);
  if (k.size() == 1) return ops::mse(Var::constant(a), Var::constant(b)).value().item();
  return ops::mse(ops::blur_same(Var::constant(a), k), ops::blur_same(Var::constant(b), k)).value().item();
}

double perceptual_proxy(const Tensor& a, const Tensor& b, const models::FeatureExtractor& y) {
  require_same(a, b, "perceptual_proxy");
  return losses::perceptual_distance(Var::constant(a), Var::constant(b), y).value().item();
}

Eigen::MatrixXd embed_all(const std::vector<Tensor>& images, const models::FeatureExtractor& y) {
  const auto rows = parallel_map<Tensor>(images.size(), thread_limit(),
                                         [&](std::size_t i) { return y.embed(Var::constant(images[i])).value(); });
  Eigen::MatrixXd m(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(y.embed_dim()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t d = 0; d < y.embed_dim(); ++d) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d];
  return m;
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols() || a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("frechet_distance: bad inputs");
  const Eigen::RowVectorXd ma = a.colwise().mean(), mb = b.colwise().mean();
  const Eigen::MatrixXd sa = covariance(a, ma), sb = covariance(b, mb);
  const Eigen::MatrixXd ra = sqrt_psd(sa);
  const Eigen::MatrixXd cross = sqrt_psd(ra * sb * ra);
  const double d = (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross.trace();
  return std::max(0.0, d);
}

double fid_proxy(const std::vector<Tensor>& a, const std::vector<Tensor>& b, const models::FeatureExtractor& y) {
  return frechet_distance(embed_all(a, y), embed_all(b, y));
}

}  // namespace irib::harness
