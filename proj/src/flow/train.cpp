#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ahsnpe/flow.hpp"

namespace ahsnpe {

namespace {

constexpr std::size_t kMinPairs = 100;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
// Stream reserved for the validation atom draws, fixed across epochs so that
// validation losses are comparable.
constexpr std::uint64_t kValidationStream = 0x5641;

using Index = Eigen::Index;

Matrix gather_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

Vector flatten_grads(const ad::Tape& tape, const std::vector<ad::Var>& nodes, const ParamLayout& layout) {
  Vector g(layout.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& b = layout.blocks()[i];
    const Matrix gi = tape.grad(nodes[i]);
    g.segment(b.offset, b.rows * b.cols) = Eigen::Map<const Vector>(gi.data(), gi.size());
  }
  return g;
}

/// Loss over one batch of standardized rows. `log_ratio` empty selects the
/// maximum-likelihood loss.
double batch_loss(const ConditionalDensityEstimator& shell, const Vector& params, const Matrix& u, const Matrix& c,
                  const Vector& log_ratio, const std::vector<Index>& rows, int n_atoms, Rng& rng, Vector* grad) {
  ad::Tape tape;
  const auto nodes = shell.parameter_nodes(tape, params, grad != nullptr);
  const auto b = static_cast<Index>(rows.size());
  ad::Var loss;
  if (log_ratio.size() == 0) {
    const ad::Var lp = shell.build_log_prob(tape, nodes, gather_rows(u, rows), gather_rows(c, rows));
    loss = tape.scale(tape.mean(lp), -1.0);
  } else {
    const Index m = std::min<Index>(n_atoms, b);
    Matrix atoms_u(b * m, u.cols());
    Matrix atoms_c(b * m, c.cols());
    Matrix ratio(b, m);
    std::vector<Index> others(static_cast<std::size_t>(b - 1));
    for (Index i = 0; i < b; ++i) {
      std::iota(others.begin(), others.end(), Index{0});
      for (Index k = i; k < b - 1; ++k) others[static_cast<std::size_t>(k)] = k + 1;
      // Partial Fisher-Yates: the first m - 1 entries become the contrast set.
      for (Index k = 0; k < m - 1; ++k) {
        std::uniform_int_distribution<Index> pick(k, b - 2);
        std::swap(others[static_cast<std::size_t>(k)], others[static_cast<std::size_t>(pick(rng))]);
      }
      for (Index j = 0; j < m; ++j) {
        const Index member = j == 0 ? i : others[static_cast<std::size_t>(j - 1)];
        const Index row = rows[static_cast<std::size_t>(member)];
        atoms_u.row(i * m + j) = u.row(row);
        atoms_c.row(i * m + j) = c.row(rows[static_cast<std::size_t>(i)]);
        ratio(i, j) = log_ratio[row];
      }
    }
    const ad::Var lp = shell.build_log_prob(tape, nodes, atoms_u, atoms_c);
    const ad::Var logits = tape.add_const(tape.reshape_rows(lp, b, m), ratio);
    loss = tape.mean(tape.sub(tape.logsumexp_rows(logits), tape.cols(logits, 0, 1)));
  }
  const double value = tape.value(loss)(0, 0);
  if (grad != nullptr && std::isfinite(value)) {
    tape.backward(loss);
    *grad = flatten_grads(tape, nodes, shell.layout());
  }
  return value;
}

ConditionalDensityEstimator train(const EstimatorSpec& spec, const Matrix& theta, const Matrix& x,
                                  const Vector& log_ratio, const TrainConfig& cfg, TrainingReport* report) {
  spec.validate();
  cfg.validate();
  const bool atomic = log_ratio.size() > 0;
  if (theta.rows() != x.rows()) throw InvalidArgument("parameter and context row counts differ");
  if (theta.cols() != spec.theta_dim || x.cols() != spec.context_dim)
    throw InvalidArgument("training data do not match the estimator dimensions");
  if (static_cast<std::size_t>(theta.rows()) < kMinPairs)
    throw InvalidArgument("training needs at least 100 parameter-data pairs");
  if (!theta.allFinite() || !x.allFinite()) throw InvalidArgument("training data contain non-finite values");

  const Standardizer st = Standardizer::fit(theta, x);
  const Matrix u = st.theta_forward(theta);
  const Matrix c = st.x_forward(x);

  Rng rng(cfg.seed);
  const Index n = theta.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::clamp<Index>(static_cast<Index>(std::llround(cfg.val_fraction * static_cast<double>(n))),
                                       atomic ? 2 : 1, n - 2);
  const std::vector<Index> val(order.end() - n_val, order.end());
  std::vector<Index> train_rows(order.begin(), order.end() - n_val);

  Vector params = cfg.warm_start.size() ? cfg.warm_start : ConditionalDensityEstimator::initial_parameters(spec, rng);
  const ConditionalDensityEstimator shell(spec, st, params);
  if (params.size() != shell.layout().size()) throw InvalidArgument("warm start does not match the estimator");

  auto chunks = [&](const std::vector<Index>& rows) {
    std::vector<std::vector<Index>> out;
    for (std::size_t s = 0; s < rows.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(rows.size(), s + static_cast<std::size_t>(cfg.batch_size));
      if (atomic && e - s < 2) continue;  // a lone item has no contrast
      out.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(s), rows.begin() + static_cast<std::ptrdiff_t>(e));
    }
    return out;
  };
  auto validation_loss = [&](const Vector& p) {
    Rng vrng = make_rng(cfg.seed, kValidationStream);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& batch : chunks(val)) {
      total += batch_loss(shell, p, u, c, log_ratio, batch, cfg.n_atoms, vrng, nullptr) * static_cast<double>(batch.size());
      count += batch.size();
    }
    return total / static_cast<double>(count);
  };

  Vector m1 = Vector::Zero(params.size());
  Vector m2 = Vector::Zero(params.size());
  std::int64_t step = 0;
  Vector best = params;
  double best_val = validation_loss(params);
  int best_epoch = 0;
  TrainingReport local;
  TrainingReport& rep = report ? *report : local;
  rep = TrainingReport{};
  Vector grad;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& batch : chunks(train_rows)) {
      const double loss = batch_loss(shell, params, u, c, log_ratio, batch, cfg.n_atoms, rng, &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << " (loss " << loss << ", |params| "
            << params.norm() << ")";
        throw NumericalError(msg.str());
      }
      const double norm = grad.norm();
      if (norm > cfg.grad_clip) grad *= cfg.grad_clip / norm;
      ++step;
      m1 = kAdamBeta1 * m1 + (1.0 - kAdamBeta1) * grad;
      m2 = kAdamBeta2 * m2 + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
      params.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + kAdamEps);
      total += loss * static_cast<double>(batch.size());
      count += batch.size();
    }
    const double val_loss = validation_loss(params);
    if (!std::isfinite(val_loss)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    rep.train_loss.push_back(count ? total / static_cast<double>(count) : 0.0);
    rep.val_loss.push_back(val_loss);
    rep.epochs = epoch;
    if (val_loss < best_val) {
      best_val = val_loss;
      best = params;
      best_epoch = epoch;
    } else if (epoch - best_epoch >= cfg.patience) {
      break;
    }
  }
  rep.best_epoch = best_epoch;
  rep.best_val_loss = best_val;
  return ConditionalDensityEstimator(spec, st, std::move(best));
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (max_epochs < 0) throw InvalidArgument("max_epochs must be non-negative");
  if (patience < 1) throw InvalidArgument("patience must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InvalidArgument("val_fraction must lie in (0, 1)");
  if (n_atoms < 2) throw InvalidArgument("n_atoms must be at least 2");
  if (!(grad_clip > 0.0)) throw InvalidArgument("grad_clip must be positive");
}

ConditionalDensityEstimator fit_npe(const EstimatorSpec& spec, const Matrix& theta, const Matrix& x,
                                    const TrainConfig& cfg, TrainingReport* report) {
  return train(spec, theta, x, Vector(), cfg, report);
}

ConditionalDensityEstimator fit_atomic(const EstimatorSpec& spec, const Matrix& theta, const Matrix& x,
                                       const Vector& log_ratio, const TrainConfig& cfg, TrainingReport* report) {
  if (log_ratio.size() != theta.rows()) throw InvalidArgument("one log ratio per training pair is required");
  for (Index i = 0; i < log_ratio.size(); ++i) {
    if (!std::isfinite(log_ratio[i])) {
      std::ostringstream msg;
      msg << "atomic log weight is not finite at theta = [" << theta.row(i) << "]";
      throw NumericalError(msg.str());
    }
  }
  return train(spec, theta, x, log_ratio, cfg, report);
}

ConditionalDensityEstimator fit_snpe_atomic(const EstimatorSpec& spec, const Matrix& theta, const Matrix& x,
                                            const Gaussian& prior, const ProposalMixture& proposal,
                                            const TrainConfig& cfg, TrainingReport* report) {
  if (proposal.empty()) throw InvalidArgument("proposal has no components");
  if (proposal.dim() != theta.cols()) throw InvalidArgument("proposal dimension does not match theta");
  const Vector support = proposal.log_density_batch(theta);
  for (Index i = 0; i < support.size(); ++i) {
    if (!std::isfinite(support[i])) {
      std::ostringstream msg;
      msg << "theta = [" << theta.row(i) << "] lies outside the proposal support";
      throw NumericalError(msg.str());
    }
  }
  const Vector log_ratio = -prior.log_density_rows(theta);
  return fit_atomic(spec, theta, x, log_ratio, cfg, report);
}

double atomic_loss(const ConditionalDensityEstimator& est, const Matrix& theta, const Matrix& x,
                   const Vector& log_ratio, int n_atoms, Rng& rng) {
  if (!est.trained()) throw InvalidArgument("estimator has not been trained");
  if (theta.rows() < 2) throw InvalidArgument("the atomic loss needs at least two items");
  if (n_atoms < 2) throw InvalidArgument("n_atoms must be at least 2");
  if (log_ratio.size() != theta.rows() || x.rows() != theta.rows()) throw InvalidArgument("batch shapes differ");
  std::vector<Index> rows(static_cast<std::size_t>(theta.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  const auto& st = est.standardizer();
  return batch_loss(est, est.parameters(), st.theta_forward(theta), st.x_forward(x), log_ratio, rows, n_atoms, rng,
                    nullptr);
}

}  // namespace ahsnpe
