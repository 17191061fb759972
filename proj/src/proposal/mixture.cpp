#include <algorithm>
#include <cmath>

#include "ahsnpe/proposal.hpp"

namespace ahsnpe {

ProposalMixture ProposalMixture::add_component(const Vector& mean, const Matrix& cov, std::int64_t n_pairs,
                                               const std::string& tag) const {
  if (n_pairs < 0) throw InvalidArgument("pair count must be non-negative");
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw InvalidArgument("component covariance does not match its mean");
  if (!components_.empty() && mean.size() != dim()) throw InvalidArgument("component dimension mismatch");
  if (contains(tag)) throw InvalidArgument("duplicate component tag '" + tag + "'");
  MixtureComponent c;
  c.mean = mean;
  c.cov = symmetrize(cov);
  c.chol = cholesky_with_jitter(c.cov);
  c.n_pairs = n_pairs;
  c.round_tag = tag;
  ProposalMixture out = *this;
  out.components_.push_back(std::move(c));
  out.total_ += n_pairs;
  return out;
}

std::pair<ProposalMixture, std::int64_t> ProposalMixture::remove_component(const std::string& tag) const {
  auto it = std::find_if(components_.begin(), components_.end(),
                         [&](const MixtureComponent& c) { return c.round_tag == tag; });
  if (it == components_.end()) throw InvalidArgument("no component tagged '" + tag + "'");
  ProposalMixture out = *this;
  const auto pos = std::distance(components_.begin(), it);
  const std::int64_t removed = it->n_pairs;
  out.components_.erase(out.components_.begin() + pos);
  out.total_ -= removed;
  return {std::move(out), removed};
}

bool ProposalMixture::contains(const std::string& tag) const {
  return std::any_of(components_.begin(), components_.end(),
                     [&](const MixtureComponent& c) { return c.round_tag == tag; });
}

int ProposalMixture::dim() const {
  return components_.empty() ? 0 : static_cast<int>(components_.front().mean.size());
}

Vector ProposalMixture::weights() const {
  Vector w(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t k = 0; k < components_.size(); ++k)
    w[static_cast<Eigen::Index>(k)] = static_cast<double>(components_[k].n_pairs) / static_cast<double>(total_);
  return w;
}

Vector ProposalMixture::log_density_batch(const Matrix& thetas) const {
  if (components_.empty() || total_ <= 0) throw InvalidArgument("proposal mixture is empty");
  if (thetas.cols() != dim()) throw InvalidArgument("parameter dimension does not match the proposal");
  const Eigen::Index n = thetas.rows();
  const auto k = static_cast<Eigen::Index>(components_.size());
  Matrix terms(n, k);
  const Vector w = weights();
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& comp = components_[static_cast<std::size_t>(c)];
    terms.col(c) = mvn_log_density_rows(thetas, comp.mean, comp.chol).array() + std::log(w[c]);
  }
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = log_sum_exp(terms.row(i).transpose());
  return out;
}

double ProposalMixture::log_density(const Vector& theta) const { return log_density_batch(theta.transpose())[0]; }

double ProposalMixture::density(const Vector& theta) const { return std::exp(log_density(theta)); }

Matrix sample_component(const Vector& mean, const Matrix& cov, Eigen::Index n, Rng& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw InvalidArgument("covariance does not match the mean");
  if (cov.trace() <= 0.0) throw InvalidArgument("degenerate (zero) covariance");
  return sample_mvn(mean, cholesky_with_jitter(cov), n, rng);
}

}  // namespace ahsnpe
