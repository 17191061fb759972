#include <cmath>

#include "ahsnpe/refbayes.hpp"

namespace ahsnpe {

namespace {

constexpr double kDefaultRwSd = 0.1;

Matrix default_rw_cov(const Matrix& rw_cov, int d) {
  if (rw_cov.size() == 0) return kDefaultRwSd * kDefaultRwSd * Matrix::Identity(d, d);
  if (rw_cov.rows() != d || rw_cov.cols() != d) throw InvalidArgument("random-walk covariance has the wrong shape");
  return rw_cov;
}

}  // namespace

ExchangeKernel::ExchangeKernel(ErgmModel model, int n_nodes, Vector observed_stats, SimConfig aux_sim)
    : model_(std::move(model)), n_nodes_(n_nodes), observed_(std::move(observed_stats)), aux_sim_(aux_sim) {
  if (observed_.size() != model_.dim()) throw InvalidArgument("observed statistics do not match the model");
}

bool ExchangeKernel::step(Vector& theta, const Gaussian& prior, const Matrix& rw_chol, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(theta.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
  const Vector proposal = theta + rw_chol * z;
  const Graph aux = simulate_with(model_, proposal, n_nodes_, aux_sim_, rng);
  const Vector aux_stats = model_.project(summary_stats(aux, model_.decay));
  const double log_ratio =
      (proposal - theta).dot(observed_ - aux_stats) + prior.log_density(proposal) - prior.log_density(theta);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (log_ratio >= 0.0 || std::log(unif(rng)) < log_ratio) {
    theta = proposal;
    return true;
  }
  return false;
}

PosteriorChain exchange_fit(const Graph& observed, const ErgmModel& model, const Vector& prior_mean,
                            const Matrix& prior_cov, const ExchangeConfig& cfg) {
  const int d = model.dim();
  if (prior_mean.size() != d) throw InvalidArgument("prior mean does not match the model");
  if (cfg.thin < 1) throw InvalidArgument("thin must be at least 1");
  const Gaussian prior(prior_mean, prior_cov);
  const ExchangeKernel kernel(model, observed.n_nodes(), model.project(summary_stats(observed, model.decay)),
                              cfg.aux_sim);
  Vector theta = cfg.init.size() ? cfg.init : prior_mean;
  if (theta.size() != d) throw InvalidArgument("initial parameter does not match the model");

  PosteriorChain chain;
  const Matrix base_cov = default_rw_cov(cfg.rw_cov, d);
  if (cfg.n_iters <= 0) {
    chain.draws = theta.transpose();
    chain.rw_cov = base_cov;
    return chain;
  }

  Rng rng(cfg.seed);
  double log_scale = 0.0;
  const Matrix base_chol = cholesky_with_jitter(base_cov);
  for (std::int64_t it = 0; it < cfg.adapt_iters; ++it) {
    const bool acc = kernel.step(theta, prior, std::exp(log_scale) * base_chol, rng);
    log_scale += ((acc ? 1.0 : 0.0) - cfg.target_acceptance) / std::pow(static_cast<double>(it + 1), 0.6);
  }
  const Matrix rw_chol = std::exp(log_scale) * base_chol;
  chain.rw_cov = std::exp(2.0 * log_scale) * base_cov;

  chain.draws.resize(cfg.n_iters, d);
  for (std::int64_t it = 0; it < cfg.n_iters; ++it) {
    for (std::int64_t s = 0; s < cfg.thin; ++s) {
      chain.accepted += kernel.step(theta, prior, rw_chol, rng) ? 1 : 0;
      ++chain.proposed;
    }
    chain.draws.row(it) = theta.transpose();
  }
  chain.acceptance_rate = static_cast<double>(chain.accepted) / static_cast<double>(chain.proposed);
  return chain;
}

}  // namespace ahsnpe
