#include "ahsnpe/driver.hpp"
#include "ahsnpe/parallel.hpp"

namespace ahsnpe {

Simulator ergm_simulator(ErgmModel model, int n_nodes, SimConfig sim, unsigned threads) {
  sim.validate();
  return [model = std::move(model), n_nodes, sim, threads](const Matrix& thetas, std::uint64_t seed) {
    SimConfig cfg = sim;
    cfg.seed = seed;
    const auto stats = simulate_stats_batch(model, thetas, n_nodes, cfg, threads);
    Matrix out(thetas.rows(), model.dim());
    for (std::size_t b = 0; b < stats.size(); ++b) out.row(static_cast<Eigen::Index>(b)) = model.project(stats[b]).transpose();
    return out;
  };
}

Simulator gaussian_simulator(Matrix noise_cov) {
  const Matrix chol = cholesky_with_jitter(noise_cov);
  return [chol](const Matrix& thetas, std::uint64_t seed) {
    if (thetas.cols() != chol.rows()) throw InvalidArgument("parameter dimension does not match the noise");
    Matrix out(thetas.rows(), thetas.cols());
    for (Eigen::Index b = 0; b < thetas.rows(); ++b) {
      Rng rng = make_rng(seed, static_cast<std::uint64_t>(b));
      out.row(b) = thetas.row(b) + (chol * standard_normal(thetas.cols(), 1, rng)).transpose();
    }
    return out;
  };
}

}  // namespace ahsnpe
