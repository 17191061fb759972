#include <cmath>
#include <numbers>

#include "networks.hpp"

namespace ahsnpe::detail {

namespace {

constexpr double kLogScaleBound = 7.0;
constexpr double kOutputInit = 1e-3;

std::string key(int k, const char* name) { return "t" + std::to_string(k) + "." + name; }

void fill_uniform(const ParamLayout& layout, Vector& params, const std::string& name, double bound, Rng& rng) {
  const auto& b = layout.block(name);
  std::uniform_real_distribution<double> unif(-bound, bound);
  for (Eigen::Index i = 0; i < b.rows * b.cols; ++i) params[b.offset + i] = bound > 0.0 ? unif(rng) : 0.0;
}

Matrix apply_mask(const Eigen::Map<const Matrix>& w, const Matrix& mask) { return w.cwiseProduct(mask); }

}  // namespace

MadeMasks made_masks(int d, int hidden, bool reversed) {
  // Hidden unit h has degree h mod d in {0, ..., d-1}; units of degree 0 see
  // the context only.
  Eigen::VectorXi degree(hidden);
  for (int h = 0; h < hidden; ++h) degree[h] = h % d;
  MadeMasks m{Matrix::Zero(d, hidden), Matrix::Zero(hidden, hidden), Matrix::Zero(hidden, d)};
  for (int i = 0; i < d; ++i) {
    const int pos = order_position(i, d, reversed);
    for (int h = 0; h < hidden; ++h) {
      if (pos <= degree[h]) m.in(i, h) = 1.0;
      if (degree[h] < pos) m.out(h, i) = 1.0;
    }
  }
  for (int a = 0; a < hidden; ++a)
    for (int b = 0; b < hidden; ++b)
      if (degree[a] <= degree[b]) m.hidden(a, b) = 1.0;
  return m;
}

void add_maf_blocks(ParamLayout& layout, const EstimatorSpec& spec) {
  const int d = spec.theta_dim, m = spec.context_dim, h = spec.hidden_units;
  for (int k = 0; k < spec.n_transforms; ++k) {
    layout.add(key(k, "W1"), d, h);
    layout.add(key(k, "C1"), m, h);
    layout.add(key(k, "b1"), 1, h);
    layout.add(key(k, "W2"), h, h);
    layout.add(key(k, "b2"), 1, h);
    layout.add(key(k, "Wm"), h, d);
    layout.add(key(k, "bm"), 1, d);
    layout.add(key(k, "Wa"), h, d);
    layout.add(key(k, "ba"), 1, d);
  }
}

void init_maf(const EstimatorSpec& spec, const ParamLayout& layout, Vector& params, Rng& rng, bool identity) {
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(spec.theta_dim + spec.context_dim));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(spec.hidden_units));
  const double out_bound = identity ? 0.0 : kOutputInit;
  for (int k = 0; k < spec.n_transforms; ++k) {
    fill_uniform(layout, params, key(k, "W1"), in_bound, rng);
    fill_uniform(layout, params, key(k, "C1"), in_bound, rng);
    fill_uniform(layout, params, key(k, "b1"), 0.0, rng);
    fill_uniform(layout, params, key(k, "W2"), hid_bound, rng);
    fill_uniform(layout, params, key(k, "b2"), 0.0, rng);
    fill_uniform(layout, params, key(k, "Wm"), out_bound, rng);
    fill_uniform(layout, params, key(k, "bm"), out_bound, rng);
    fill_uniform(layout, params, key(k, "Wa"), out_bound, rng);
    fill_uniform(layout, params, key(k, "ba"), out_bound, rng);
  }
}

ad::Var maf_log_prob(ad::Tape& t, const EstimatorSpec& spec, const BlockNodes& p, const Matrix& u_in,
                     const Matrix& c_in) {
  const int d = spec.theta_dim;
  ad::Var u = t.constant(u_in);
  const ad::Var c = t.constant(c_in);
  ad::Var neg_logdet{};
  for (int k = 0; k < spec.n_transforms; ++k) {
    const MadeMasks masks = made_masks(d, spec.hidden_units, k % 2 == 1);
    ad::Var h = t.matmul(u, t.mul_const(p(key(k, "W1")), masks.in));
    h = t.tanh(t.add_row(t.add(h, t.matmul(c, p(key(k, "C1")))), p(key(k, "b1"))));
    h = t.tanh(t.add_row(t.matmul(h, t.mul_const(p(key(k, "W2")), masks.hidden)), p(key(k, "b2"))));
    const ad::Var shift = t.add_row(t.matmul(h, t.mul_const(p(key(k, "Wm")), masks.out)), p(key(k, "bm")));
    const ad::Var log_scale = t.clamp(
        t.add_row(t.matmul(h, t.mul_const(p(key(k, "Wa")), masks.out)), p(key(k, "ba"))), -kLogScaleBound,
        kLogScaleBound);
    u = t.mul(t.sub(u, shift), t.exp(t.scale(log_scale, -1.0)));
    const ad::Var s = t.sum_cols(log_scale);
    neg_logdet = k == 0 ? s : t.add(neg_logdet, s);
  }
  const double norm = 0.5 * d * std::log(2.0 * std::numbers::pi);
  const ad::Var base = t.add_scalar(t.scale(t.sum_cols(t.square(u)), -0.5), -norm);
  return t.sub(base, neg_logdet);
}

std::pair<Matrix, Matrix> made_outputs(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params,
                                       int k, const Matrix& u, const Matrix& c) {
  const MadeMasks masks = made_masks(spec.theta_dim, spec.hidden_units, k % 2 == 1);
  auto v = [&](const char* name) { return block_view(layout, params, key(k, name)); };
  Matrix h = u * apply_mask(v("W1"), masks.in) + c * v("C1");
  h = ad::tanh_values(h.rowwise() + v("b1").row(0));
  h = ad::tanh_values((h * apply_mask(v("W2"), masks.hidden)).rowwise() + v("b2").row(0));
  Matrix shift = (h * apply_mask(v("Wm"), masks.out)).rowwise() + v("bm").row(0);
  Matrix log_scale = ((h * apply_mask(v("Wa"), masks.out)).rowwise() + v("ba").row(0))
                         .array()
                         .max(-kLogScaleBound)
                         .min(kLogScaleBound)
                         .matrix();
  return {std::move(shift), std::move(log_scale)};
}

std::pair<Matrix, Vector> maf_forward(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params,
                                      const Matrix& u_in, const Matrix& c) {
  Matrix u = u_in;
  Vector logdet = Vector::Zero(u.rows());
  for (int k = 0; k < spec.n_transforms; ++k) {
    const auto [shift, log_scale] = made_outputs(spec, layout, params, k, u, c);
    u = ((u - shift).array() * (-log_scale.array()).exp()).matrix();
    logdet -= log_scale.rowwise().sum();
  }
  return {std::move(u), std::move(logdet)};
}

Matrix maf_inverse(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params, const Matrix& z,
                   const Matrix& c) {
  const int d = spec.theta_dim;
  Matrix y = z;
  for (int k = spec.n_transforms - 1; k >= 0; --k) {
    const bool reversed = k % 2 == 1;
    Matrix u = Matrix::Zero(y.rows(), d);
    // Coordinate at position p depends only on earlier positions, so one pass
    // per position recovers the inputs in order.
    for (int pos = 1; pos <= d; ++pos) {
      const int i = reversed ? d - pos : pos - 1;
      const auto [shift, log_scale] = made_outputs(spec, layout, params, k, u, c);
      u.col(i) = (y.col(i).array() * log_scale.col(i).array().exp()).matrix() + shift.col(i);
    }
    y = std::move(u);
  }
  return y;
}

}  // namespace ahsnpe::detail
