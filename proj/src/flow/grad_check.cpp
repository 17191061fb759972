#include <algorithm>
#include <cmath>

#include "ahsnpe/flow.hpp"

namespace ahsnpe {

namespace {

constexpr double kStep = 1e-5;
constexpr double kFloor = 1e-3;

}  // namespace

double max_relative_error(const Vector& analytic, const Vector& numeric) {
  if (analytic.size() != numeric.size()) throw InvalidArgument("gradient sizes differ");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], b = numeric[i];
    worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), kFloor}));
  }
  return worst;
}

double grad_check(const ConditionalDensityEstimator& est, const Vector& theta, const Vector& x) {
  if (!est.trained()) throw InvalidArgument("estimator has not been trained");
  const Vector& params = est.parameters();
  if (params.size() == 0) return 0.0;
  const Matrix u = est.standardizer().theta_forward(theta.transpose());
  const Matrix c = est.standardizer().x_forward(x.transpose());

  ad::Tape tape;
  const auto nodes = est.parameter_nodes(tape, params, true);
  const ad::Var lp = est.build_log_prob(tape, nodes, u, c);
  tape.backward(lp);
  Vector analytic(params.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& b = est.layout().blocks()[i];
    const Matrix g = tape.grad(nodes[i]);
    analytic.segment(b.offset, b.rows * b.cols) = Eigen::Map<const Vector>(g.data(), g.size());
  }

  auto eval = [&](const Vector& p) {
    ad::Tape t;
    return t.value(est.build_log_prob(t, est.parameter_nodes(t, p, false), u, c))(0, 0);
  };
  Vector numeric(params.size());
  Vector p = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    p[i] = params[i] + kStep;
    const double up = eval(p);
    p[i] = params[i] - kStep;
    const double down = eval(p);
    p[i] = params[i];
    numeric[i] = (up - down) / (2.0 * kStep);
  }
  return max_relative_error(analytic, numeric);
}

}  // namespace ahsnpe
