#include <cmath>

#include "ahsnpe/parallel.hpp"
#include "ahsnpe/refbayes.hpp"

namespace ahsnpe {

Matrix HierChain::sigma_g_at(Eigen::Index iter) const {
  const auto d = theta_g.cols();
  const Vector flat = sigma_g.row(iter).transpose();
  return Eigen::Map<const Matrix>(flat.data(), d, d);
}

HierChain hier_gibbs_fit(const NiwHyper& niw, Matrix locals, const LocalKernel& kernel, const HierGibbsConfig& cfg) {
  niw.validate();
  const auto n = static_cast<std::size_t>(locals.rows());
  const int d = niw.dim();
  if (n < 2) throw InvalidArgument("hierarchical fit needs at least two observations");
  if (locals.cols() != d) throw InvalidArgument("local parameters do not match the hyper-prior dimension");
  if (cfg.n_iters < 1 || cfg.burn_in < 0) throw InvalidArgument("invalid Gibbs chain length");

  HierChain out;
  out.theta_g.resize(cfg.n_iters, d);
  out.sigma_g.resize(cfg.n_iters, d * d);
  out.local.assign(n, Matrix(cfg.n_iters, d));
  std::vector<std::int64_t> accepted(n, 0);

  Vector theta_g = niw.mu0;
  Matrix sigma_g = niw_map_covariance(niw);
  const std::int64_t total = cfg.burn_in + cfg.n_iters;
  const std::uint64_t streams_per_sweep = n + 1;

  for (std::int64_t sweep = 0; sweep < total; ++sweep) {
    const Gaussian prior(theta_g, sigma_g);
    const std::uint64_t base = static_cast<std::uint64_t>(sweep) * streams_per_sweep;
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      Rng rng = make_rng(cfg.seed, base + i);
      Vector theta_i = locals.row(static_cast<Eigen::Index>(i)).transpose();
      const bool moved = kernel(i, theta_i, prior, sweep, rng);
      locals.row(static_cast<Eigen::Index>(i)) = theta_i.transpose();
      if (sweep >= cfg.burn_in && moved) ++accepted[i];
    });

    Rng global_rng = make_rng(cfg.seed, base + n);
    const NiwDraw draw = sample_niw(niw_posterior(niw, locals), global_rng);
    theta_g = draw.mean;
    sigma_g = draw.cov;

    if (sweep >= cfg.burn_in) {
      const std::int64_t r = sweep - cfg.burn_in;
      out.theta_g.row(r) = theta_g.transpose();
      out.sigma_g.row(r) = Eigen::Map<const RowVector>(sigma_g.data(), d * d);
      for (std::size_t i = 0; i < n; ++i) out.local[i].row(r) = locals.row(static_cast<Eigen::Index>(i));
    }
  }
  out.local_acceptance.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    out.local_acceptance[static_cast<Eigen::Index>(i)] =
        static_cast<double>(accepted[i]) / static_cast<double>(cfg.n_iters);
  return out;
}

HierChain hier_gibbs_fit(std::span<const Graph> graphs, const ErgmModel& model, const NiwHyper& niw,
                         const HierGibbsConfig& cfg) {
  const int d = model.dim();
  if (niw.dim() != d) throw InvalidArgument("hyper-prior dimension does not match the model");
  std::vector<ExchangeKernel> kernels;
  kernels.reserve(graphs.size());
  for (const auto& g : graphs)
    kernels.emplace_back(model, g.n_nodes(), model.project(summary_stats(g, model.decay)), cfg.aux_sim);

  const Matrix base_cov =
      cfg.local_rw_cov.size() ? cfg.local_rw_cov : Matrix(0.01 * Matrix::Identity(d, d));
  const Matrix base_chol = cholesky_with_jitter(base_cov);
  // Per-network log scale of the random walk, tuned during burn-in only. Each
  // entry is touched by a single worker per sweep.
  std::vector<double> log_scale(graphs.size(), 0.0);

  LocalKernel kernel = [&](std::size_t i, Vector& theta, const Gaussian& prior, std::int64_t sweep, Rng& rng) {
    const bool acc = kernels[i].step(theta, prior, std::exp(log_scale[i]) * base_chol, rng);
    if (sweep < cfg.burn_in)
      log_scale[i] += ((acc ? 1.0 : 0.0) - cfg.target_acceptance) / std::pow(static_cast<double>(sweep + 1), 0.6);
    return acc;
  };
  Matrix init = niw.mu0.transpose().replicate(static_cast<Eigen::Index>(graphs.size()), 1);
  return hier_gibbs_fit(niw, std::move(init), kernel, cfg);
}

}  // namespace ahsnpe
