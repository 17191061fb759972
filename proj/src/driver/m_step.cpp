#include <cmath>

#include "ahsnpe/driver.hpp"

namespace ahsnpe {

MStepResult m_step(const NiwHyper& niw, std::span<const MomentPair> moments) {
  niw.validate();
  const int d = niw.dim();
  MStepResult out;
  if (moments.empty()) {
    out.posterior = niw;
    out.theta_g = niw.mu0;
    out.sigma_g = niw_map_covariance(niw);
    return out;
  }
  const auto n = static_cast<double>(moments.size());
  Vector mean_bar = Vector::Zero(d);
  for (const auto& m : moments) {
    if (m.mean.size() != d || m.cov.rows() != d || m.cov.cols() != d)
      throw InvalidArgument("moment dimension does not match the hyper-prior");
    mean_bar += m.mean;
  }
  mean_bar /= n;

  Matrix psi = niw.psi0;
  for (const auto& m : moments) {
    const Vector dev = m.mean - mean_bar;
    psi += m.cov + dev * dev.transpose();
  }
  const Vector shift = niw.mu0 - mean_bar;
  psi += (niw.kappa0 * n / (niw.kappa0 + n)) * shift * shift.transpose();
  psi = symmetrize(psi);
  if (!psi.allFinite() || !is_psd(psi))
    throw NumericalError("updated NIW scale matrix is not PSD; the local moments are corrupt");

  out.posterior.kappa0 = niw.kappa0 + n;
  out.posterior.nu0 = niw.nu0 + n;
  out.posterior.mu0 = (niw.kappa0 * niw.mu0 + n * mean_bar) / out.posterior.kappa0;
  out.posterior.psi0 = psi;
  out.theta_g = out.posterior.mu0;
  out.sigma_g = niw_map_covariance(out.posterior);
  return out;
}

MomentPair moments_from_samples(const Matrix& samples) {
  if (samples.rows() < 2) throw InvalidArgument("moments need at least two samples");
  return {sample_mean(samples), sample_covariance(samples, false)};
}

MomentPair moments_from_estimator(const ConditionalDensityEstimator& est, const Vector& x, Eigen::Index n_samples,
                                  Rng& rng) {
  return moments_from_samples(est.sample(x, n_samples, rng));
}

double relative_change(const Vector& now, const Vector& before) {
  if (now.size() != before.size() || now.size() == 0) throw InvalidArgument("relative change needs equal sizes");
  double total = 0.0;
  for (Eigen::Index k = 0; k < now.size(); ++k) {
    const double delta = std::abs(now[k] - before[k]);
    total += std::abs(before[k]) < 1e-8 ? delta : delta / std::abs(before[k]);
  }
  return total / static_cast<double>(now.size());
}

}  // namespace ahsnpe
