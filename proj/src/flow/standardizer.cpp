#include <cmath>

#include "ahsnpe/flow.hpp"

namespace ahsnpe {

namespace {

constexpr double kMinSd = 1e-12;

void column_moments(const Matrix& m, const char* what, Vector& mean, Vector& sd) {
  if (m.rows() < 2) throw InvalidArgument(std::string("too few rows to standardize ") + what);
  mean = m.colwise().mean().transpose();
  sd = ((m.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index k = 0; k < sd.size(); ++k)
    if (!(sd[k] >= kMinSd))
      throw InvalidArgument(std::string(what) + " coordinate " + std::to_string(k) + " is constant (sd < 1e-12)");
}

}  // namespace

Standardizer Standardizer::fit(const Matrix& theta, const Matrix& x) {
  if (theta.rows() != x.rows()) throw InvalidArgument("parameter and context row counts differ");
  Standardizer s;
  column_moments(theta, "parameter", s.theta_mean, s.theta_sd);
  column_moments(x, "context", s.x_mean, s.x_sd);
  return s;
}

Standardizer Standardizer::identity(int theta_dim, int context_dim) {
  Standardizer s;
  s.theta_mean = Vector::Zero(theta_dim);
  s.theta_sd = Vector::Ones(theta_dim);
  s.x_mean = Vector::Zero(context_dim);
  s.x_sd = Vector::Ones(context_dim);
  return s;
}

Matrix Standardizer::theta_forward(const Matrix& theta) const {
  return (theta.rowwise() - theta_mean.transpose()).array().rowwise() / theta_sd.transpose().array();
}

Matrix Standardizer::theta_inverse(const Matrix& u) const {
  return (u.array().rowwise() * theta_sd.transpose().array()).matrix().rowwise() + theta_mean.transpose();
}

Matrix Standardizer::x_forward(const Matrix& x) const {
  return (x.rowwise() - x_mean.transpose()).array().rowwise() / x_sd.transpose().array();
}

}  // namespace ahsnpe
