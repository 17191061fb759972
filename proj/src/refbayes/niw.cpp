#include "ahsnpe/niw.hpp"

#include <cmath>

#include "ahsnpe/linalg.hpp"

namespace ahsnpe {

void NiwHyper::validate() const {
  const int d = dim();
  if (d < 1) throw InvalidArgument("NIW dimension must be at least 1");
  if (!(kappa0 > 0.0)) throw InvalidArgument("NIW kappa0 must be positive");
  if (psi0.rows() != d || psi0.cols() != d) throw InvalidArgument("NIW psi0 has the wrong shape");
  if (!(nu0 > d - 1)) throw InvalidArgument("NIW nu0 must exceed d - 1");
  if ((psi0 - psi0.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw InvalidArgument("NIW psi0 must be symmetric");
  if (!is_psd(psi0)) throw InvalidArgument("NIW psi0 must be PSD");
}

NiwHyper NiwHyper::weakly_informative(int d) {
  return NiwHyper{Vector::Zero(d), 1.0, static_cast<double>(d) * Matrix::Identity(d, d), d + 2.0};
}

NiwHyper niw_posterior(const NiwHyper& prior, const Matrix& points) {
  const auto n = static_cast<double>(points.rows());
  if (points.rows() == 0) return prior;
  const Vector mean = sample_mean(points);
  const Matrix centred = points.rowwise() - mean.transpose();
  const Matrix scatter = centred.transpose() * centred;
  const Vector diff = mean - prior.mu0;
  NiwHyper post;
  post.kappa0 = prior.kappa0 + n;
  post.nu0 = prior.nu0 + n;
  post.mu0 = (prior.kappa0 * prior.mu0 + n * mean) / post.kappa0;
  post.psi0 = symmetrize(prior.psi0 + scatter + (prior.kappa0 * n / post.kappa0) * diff * diff.transpose());
  return post;
}

Matrix niw_map_covariance(const NiwHyper& h) { return h.psi0 / (h.nu0 + h.dim() + 1.0); }

Matrix sample_inverse_wishart(const Matrix& psi, double nu, Rng& rng) {
  const auto d = psi.rows();
  if (!(nu > static_cast<double>(d) - 1.0)) throw InvalidArgument("inverse-Wishart needs nu > d - 1");
  // W = Sigma^{-1} ~ Wishart(psi^{-1}, nu). With psi^{-1} = L L^T and the
  // Bartlett factor A, W = L A A^T L^T.
  const Matrix psi_inv = symmetrize(psi.inverse());
  const Matrix l = cholesky_with_jitter(psi_inv);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    std::chi_squared_distribution<double> chi2(nu - static_cast<double>(i));
    a(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Matrix la = l * a;
  const Matrix w = la * la.transpose();
  return symmetrize(w.inverse());
}

NiwDraw sample_niw(const NiwHyper& h, Rng& rng) {
  NiwDraw out;
  out.cov = sample_inverse_wishart(h.psi0, h.nu0, rng);
  const Matrix chol = cholesky_with_jitter(out.cov / h.kappa0);
  out.mean = sample_mvn(h.mu0, chol, 1, rng).row(0).transpose();
  return out;
}

}  // namespace ahsnpe
