#include <cmath>
#include <numbers>

#include "networks.hpp"

namespace ahsnpe::detail {

namespace {

int n_off_diagonal(int d) { return d * (d - 1) / 2; }

// softplus(kUnitDiagonal) = 1.
const double kUnitDiagonal = std::log(std::numbers::e - 1.0);

struct MdnOutputs {
  Matrix logits, mean, diag, off;
};

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

MdnOutputs mdn_outputs(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params, const Matrix& c) {
  auto v = [&](const char* name) { return block_view(layout, params, name); };
  Matrix feat = c;
  if (spec.hidden_units > 0) {
    feat = ad::tanh_values((feat * v("W1")).rowwise() + v("b1").row(0));
    feat = ad::tanh_values((feat * v("W2")).rowwise() + v("b2").row(0));
  }
  MdnOutputs out;
  out.logits = (feat * v("Wl")).rowwise() + v("bl").row(0);
  out.mean = (feat * v("Wmu")).rowwise() + v("bmu").row(0);
  out.diag = ((feat * v("Wdiag")).rowwise() + v("bdiag").row(0)).unaryExpr([](double a) { return softplus(a); });
  if (spec.theta_dim > 1) out.off = (feat * v("Woff")).rowwise() + v("boff").row(0);
  return out;
}

void fill(const ParamLayout& layout, Vector& params, const std::string& name, double bound, Rng& rng) {
  const auto& b = layout.block(name);
  std::uniform_real_distribution<double> unif(-bound, bound);
  for (Eigen::Index i = 0; i < b.rows * b.cols; ++i) params[b.offset + i] = unif(rng);
}

}  // namespace

void add_mdn_blocks(ParamLayout& layout, const EstimatorSpec& spec) {
  const int d = spec.theta_dim, m = spec.context_dim, h = spec.hidden_units, k = spec.n_components;
  int feat = m;
  if (h > 0) {
    layout.add("W1", m, h);
    layout.add("b1", 1, h);
    layout.add("W2", h, h);
    layout.add("b2", 1, h);
    feat = h;
  }
  layout.add("Wl", feat, k);
  layout.add("bl", 1, k);
  layout.add("Wmu", feat, k * d);
  layout.add("bmu", 1, k * d);
  layout.add("Wdiag", feat, k * d);
  layout.add("bdiag", 1, k * d);
  if (d > 1) {
    layout.add("Woff", feat, k * n_off_diagonal(d));
    layout.add("boff", 1, k * n_off_diagonal(d));
  }
}

void init_mdn(const EstimatorSpec& spec, const ParamLayout& layout, Vector& params, Rng& rng) {
  const int feat = spec.hidden_units > 0 ? spec.hidden_units : spec.context_dim;
  const double out_bound = 0.1 / std::sqrt(static_cast<double>(feat));
  if (spec.hidden_units > 0) {
    fill(layout, params, "W1", 1.0 / std::sqrt(static_cast<double>(spec.context_dim)), rng);
    fill(layout, params, "W2", 1.0 / std::sqrt(static_cast<double>(spec.hidden_units)), rng);
  }
  fill(layout, params, "Wl", out_bound, rng);
  fill(layout, params, "Wmu", out_bound, rng);
  fill(layout, params, "Wdiag", out_bound, rng);
  // Spread component means so that they do not start identical.
  const auto& bmu = layout.block("bmu");
  std::normal_distribution<double> normal(0.0, spec.n_components > 1 ? 1.0 : 0.0);
  for (Eigen::Index i = 0; i < bmu.cols; ++i) params[bmu.offset + i] = spec.n_components > 1 ? normal(rng) : 0.0;
  const auto& bdiag = layout.block("bdiag");
  params.segment(bdiag.offset, bdiag.cols).setConstant(kUnitDiagonal);
  if (spec.theta_dim > 1) fill(layout, params, "Woff", out_bound, rng);
}

ad::Var mdn_log_prob(ad::Tape& t, const EstimatorSpec& spec, const BlockNodes& p, const Matrix& u_in,
                     const Matrix& c_in) {
  const int d = spec.theta_dim;
  const int n_off = n_off_diagonal(d);
  const ad::Var u = t.constant(u_in);
  ad::Var feat = t.constant(c_in);
  if (spec.hidden_units > 0) {
    feat = t.tanh(t.add_row(t.matmul(feat, p("W1")), p("b1")));
    feat = t.tanh(t.add_row(t.matmul(feat, p("W2")), p("b2")));
  }
  const ad::Var logits = t.add_row(t.matmul(feat, p("Wl")), p("bl"));
  const ad::Var log_w = t.sub_col(logits, t.logsumexp_rows(logits));
  const ad::Var mean = t.add_row(t.matmul(feat, p("Wmu")), p("bmu"));
  const ad::Var diag = t.softplus(t.add_row(t.matmul(feat, p("Wdiag")), p("bdiag")));
  ad::Var off{};
  if (d > 1) off = t.add_row(t.matmul(feat, p("Woff")), p("boff"));

  const double norm = 0.5 * d * std::log(2.0 * std::numbers::pi);
  std::vector<ad::Var> comps;
  for (int k = 0; k < spec.n_components; ++k) {
    std::vector<ad::Var> diff;
    for (int j = 0; j < d; ++j) diff.push_back(t.sub(t.cols(u, j, 1), t.cols(mean, k * d + j, 1)));
    // |U (u - mean)|^2 with U upper triangular, row by row.
    ad::Var quad{};
    int pair = 0;
    for (int r = 0; r < d; ++r) {
      ad::Var y = t.mul(t.cols(diag, k * d + r, 1), diff[static_cast<std::size_t>(r)]);
      for (int j = r + 1; j < d; ++j, ++pair)
        y = t.add(y, t.mul(t.cols(off, k * n_off + pair, 1), diff[static_cast<std::size_t>(j)]));
      quad = r == 0 ? t.square(y) : t.add(quad, t.square(y));
    }
    const ad::Var log_det = t.sum_cols(t.log(t.cols(diag, k * d, d)));
    const ad::Var comp = t.add_scalar(t.sub(log_det, t.scale(quad, 0.5)), -norm);
    comps.push_back(t.add(t.cols(log_w, k, 1), comp));
  }
  return t.logsumexp_rows(t.concat_cols(comps));
}

Matrix mdn_sample(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params, const RowVector& c,
                  Eigen::Index n, Rng& rng) {
  const int d = spec.theta_dim;
  const int n_off = n_off_diagonal(d);
  const MdnOutputs o = mdn_outputs(spec, layout, params, c);
  std::vector<double> w(static_cast<std::size_t>(spec.n_components));
  const double lse = log_sum_exp(o.logits.row(0).transpose());
  for (int k = 0; k < spec.n_components; ++k) w[static_cast<std::size_t>(k)] = std::exp(o.logits(0, k) - lse);
  std::discrete_distribution<int> pick(w.begin(), w.end());

  std::vector<Matrix> upper(static_cast<std::size_t>(spec.n_components), Matrix::Zero(d, d));
  for (int k = 0; k < spec.n_components; ++k) {
    Matrix& U = upper[static_cast<std::size_t>(k)];
    int pair = 0;
    for (int r = 0; r < d; ++r) {
      U(r, r) = o.diag(0, k * d + r);
      for (int j = r + 1; j < d; ++j, ++pair) U(r, j) = o.off(0, k * n_off + pair);
    }
  }
  Matrix out(n, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(d);
  for (Eigen::Index s = 0; s < n; ++s) {
    const int k = pick(rng);
    for (int j = 0; j < d; ++j) z[j] = normal(rng);
    const Vector x = upper[static_cast<std::size_t>(k)].triangularView<Eigen::Upper>().solve(z);
    out.row(s) = (o.mean.row(0).segment(k * d, d) + x.transpose());
  }
  return out;
}

}  // namespace ahsnpe::detail
