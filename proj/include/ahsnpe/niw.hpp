#pragma once

#include "ahsnpe/core.hpp"

namespace ahsnpe {

/// Normal-inverse-Wishart hyperparameters:
///   Sigma ~ IW(psi, nu),  mean | Sigma ~ N(mu, Sigma / kappa).
struct NiwHyper {
  Vector mu0;
  double kappa0 = 1.0;
  Matrix psi0;
  double nu0 = 0.0;

  int dim() const { return static_cast<int>(mu0.size()); }
  void validate() const;

  /// mu0 = 0, kappa0 = 1, psi0 = d * I, nu0 = d + 2.
  static NiwHyper weakly_informative(int d);
};

/// Textbook conjugate update for directly observed points (rows).
NiwHyper niw_posterior(const NiwHyper& prior, const Matrix& points);

/// Mode of the (mean, Sigma) joint: mean = mu, Sigma = psi / (nu + d + 1).
Matrix niw_map_covariance(const NiwHyper& h);

/// Sigma ~ IW(psi, nu) via the Bartlett decomposition of its Wishart inverse.
Matrix sample_inverse_wishart(const Matrix& psi, double nu, Rng& rng);

struct NiwDraw {
  Vector mean;
  Matrix cov;
};

NiwDraw sample_niw(const NiwHyper& h, Rng& rng);

}  // namespace ahsnpe
