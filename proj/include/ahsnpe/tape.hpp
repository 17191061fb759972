#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ahsnpe/core.hpp"

namespace ahsnpe::ad {

/// tanh through the vectorized exponential; exact to a few ulp.
inline Matrix tanh_values(const Matrix& x) {
  return (1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0)).matrix();
}

/// Handle to a node recorded on a Tape.
struct Var {
  int id = -1;
};

/// Reverse-mode differentiation over dense matrix operations. Every operation
/// evaluates eagerly and records a closure that propagates the adjoint of its
/// output to its inputs. Nodes that do not depend on a variable record no
/// closure, so a tape built from constants only is a plain forward pass.
class Tape {
 public:
  Var variable(Matrix value) { return leaf(std::move(value), true); }
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  /// Adjoint after backward(); a zero matrix for nodes the output does not reach.
  Matrix grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  /// a + row, with the 1 x c row broadcast over the rows of a.
  Var add_row(Var a, Var row);
  /// a - col, with the r x 1 column broadcast over the columns of a.
  Var sub_col(Var a, Var col);
  Var add_const(Var a, const Matrix& c);
  Var mul_const(Var a, const Matrix& c);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);

  Var tanh(Var a);
  Var softplus(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);
  /// Elementwise clamp; the derivative is zero outside (lo, hi).
  Var clamp(Var a, double lo, double hi);

  Var cols(Var a, Eigen::Index start, Eigen::Index count);
  Var concat_cols(std::span<const Var> parts);
  /// Row sums: r x c -> r x 1.
  Var sum_cols(Var a);
  /// Row-wise log-sum-exp: r x c -> r x 1.
  Var logsumexp_rows(Var a);
  /// (rows * cols) x 1 -> rows x cols with out(b, k) = in(b * cols + k).
  Var reshape_rows(Var a, Eigen::Index rows, Eigen::Index cols);
  /// Mean of all entries, 1 x 1.
  Var mean(Var a);

  /// Seeds d(out)/d(out) = 1 for a 1 x 1 output and sweeps the tape backwards.
  void backward(Var out);

 private:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var leaf(Matrix value, bool requires_grad);
  Var push(Matrix value, bool requires_grad, Backward backward);
  void require_same_shape(Var a, Var b, const char* op) const;
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  void accumulate(Var v, const Matrix& g);

  std::vector<Node> nodes_;
};

}  // namespace ahsnpe::ad
