#include "ahsnpe/tape.hpp"

#include <cmath>
#include <string>

namespace ahsnpe::ad {

namespace {

Eigen::ArrayXXd stable_softplus(const Eigen::ArrayXXd& x) {
  return x.max(0.0) + (-x.abs()).exp().log1p();
}

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) { return 1.0 / (1.0 + (-x).exp()); }

}  // namespace

Var Tape::leaf(Matrix value, bool requires_grad) { return push(std::move(value), requires_grad, nullptr); }

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Var out) {
  Node& root = nodes_[static_cast<std::size_t>(out.id)];
  if (root.value.rows() != 1 || root.value.cols() != 1) throw InvalidArgument("backward() needs a scalar output");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  root.grad = Matrix::Ones(1, 1);
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    // The closure may accumulate into earlier nodes only, so the reference
    // into nodes_ stays valid.
    n.backward(*this, n.grad);
  }
}

void Tape::require_same_shape(Var a, Var b, const char* op) const {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw InvalidArgument(std::string(op) + " shape mismatch");
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw InvalidArgument("matmul shape mismatch");
  Matrix out = value(a) * value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Matrix out = value(a) + value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Matrix out = value(a) - value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs(b)) t.accumulate(b, -g);
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Matrix out = value(a).cwiseProduct(value(b));
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.needs(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) throw InvalidArgument("add_row shape mismatch");
  Matrix out = value(a).rowwise() + value(row).row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::sub_col(Var a, Var col) {
  if (value(col).cols() != 1 || value(col).rows() != value(a).rows()) throw InvalidArgument("sub_col shape mismatch");
  Matrix out = value(a).colwise() - value(col).col(0);
  return push(std::move(out), needs(a) || needs(col), [a, col](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs(col)) t.accumulate(col, -g.rowwise().sum());
  });
}

Var Tape::add_const(Var a, const Matrix& c) {
  if (c.rows() != value(a).rows() || c.cols() != value(a).cols()) throw InvalidArgument("add_const shape mismatch");
  Matrix out = value(a) + c;
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var Tape::mul_const(Var a, const Matrix& c) {
  if (c.rows() != value(a).rows() || c.cols() != value(a).cols()) throw InvalidArgument("mul_const shape mismatch");
  Matrix out = value(a).cwiseProduct(c);
  return push(std::move(out), needs(a), [a, c](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseProduct(c)); });
}

Var Tape::scale(Var a, double s) {
  Matrix out = s * value(a);
  return push(std::move(out), needs(a), [a, s](Tape& t, const Matrix& g) { t.accumulate(a, s * g); });
}

Var Tape::add_scalar(Var a, double s) {
  Matrix out = value(a).array() + s;
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var Tape::tanh(Var a) {
  Matrix out = tanh_values(value(a));
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), needs(a), [a, self](Tape& t, const Matrix& g) {
    const auto& y = t.nodes_[static_cast<std::size_t>(self)].value.array();
    t.accumulate(a, (g.array() * (1.0 - y.square())).matrix());
  });
}

Var Tape::softplus(Var a) {
  Matrix out = stable_softplus(value(a).array()).matrix();
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (g.array() * sigmoid(t.value(a).array())).matrix());
  });
}

Var Tape::exp(Var a) {
  Matrix out = value(a).array().exp().matrix();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), needs(a), [a, self](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(t.nodes_[static_cast<std::size_t>(self)].value));
  });
}

Var Tape::log(Var a) {
  Matrix out = value(a).array().log().matrix();
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (g.array() / t.value(a).array()).matrix());
  });
}

Var Tape::square(Var a) {
  Matrix out = value(a).array().square().matrix();
  return push(std::move(out), needs(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (2.0 * g.array() * t.value(a).array()).matrix());
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Matrix out = value(a).array().max(lo).min(hi).matrix();
  return push(std::move(out), needs(a), [a, lo, hi](Tape& t, const Matrix& g) {
    const auto& x = t.value(a).array();
    t.accumulate(a, (g.array() * ((x > lo) && (x < hi)).cast<double>()).matrix());
  });
}

Var Tape::cols(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& v = value(a);
  if (start < 0 || count < 0 || start + count > v.cols()) throw InvalidArgument("cols() range out of bounds");
  Matrix out = v.middleCols(start, count);
  const Eigen::Index rows = v.rows();
  const Eigen::Index total = v.cols();
  return push(std::move(out), needs(a), [a, start, count, rows, total](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(rows, total);
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols() needs at least one part");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index total = 0;
  bool any = false;
  for (const Var p : parts) {
    if (value(p).rows() != rows) throw InvalidArgument("concat_cols() row mismatch");
    total += value(p).cols();
    any = any || needs(p);
  }
  Matrix out(rows, total);
  Eigen::Index offset = 0;
  for (const Var p : parts) {
    out.middleCols(offset, value(p).cols()) = value(p);
    offset += value(p).cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), any, [inputs](Tape& t, const Matrix& g) {
    Eigen::Index off = 0;
    for (const Var p : inputs) {
      const Eigen::Index c = t.value(p).cols();
      if (t.needs(p)) t.accumulate(p, g.middleCols(off, c));
      off += c;
    }
  });
}

Var Tape::sum_cols(Var a) {
  Matrix out = value(a).rowwise().sum();
  const Eigen::Index c = value(a).cols();
  return push(std::move(out), needs(a), [a, c](Tape& t, const Matrix& g) { t.accumulate(a, g.replicate(1, c)); });
}

Var Tape::logsumexp_rows(Var a) {
  const Matrix& v = value(a);
  const Eigen::VectorXd m = v.rowwise().maxCoeff();
  const Matrix shifted = v.colwise() - m;
  Matrix out = (m.array() + shifted.array().exp().rowwise().sum().log()).matrix();
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), needs(a), [a, self](Tape& t, const Matrix& g) {
    const Matrix& lse = t.nodes_[static_cast<std::size_t>(self)].value;
    const Matrix softmax = (t.value(a).colwise() - lse.col(0)).array().exp().matrix();
    t.accumulate(a, softmax.array().colwise() * g.col(0).array());
  });
}

Var Tape::reshape_rows(Var a, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& v = value(a);
  if (v.cols() != 1 || v.rows() != rows * cols) throw InvalidArgument("reshape_rows() size mismatch");
  Matrix out = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), rows, cols);
  return push(std::move(out), needs(a), [a, rows, cols](Tape& t, const Matrix& g) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = g;
    t.accumulate(a, Eigen::Map<const Matrix>(row_major.data(), rows * cols, 1));
  });
}

Var Tape::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  Matrix out(1, 1);
  out(0, 0) = value(a).mean();
  const Eigen::Index r = value(a).rows();
  const Eigen::Index c = value(a).cols();
  return push(std::move(out), needs(a), [a, n, r, c](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(r, c, g(0, 0) / n));
  });
}

}  // namespace ahsnpe::ad
