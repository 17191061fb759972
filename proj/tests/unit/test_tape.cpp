#include <doctest.h>

#include <functional>

#include "ahsnpe/tape.hpp"

using namespace ahsnpe;
using ad::Tape;
using ad::Var;

namespace {

using Build = std::function<Var(Tape&, Var)>;

// Reduces the op output to a scalar with fixed random weights so that every
// output entry contributes a distinct adjoint.
double scalar_of(Tape& t, Var out, Var* loss) {
  const Matrix& v = t.value(out);
  Rng rng(1234);
  const Matrix w = standard_normal(v.rows(), v.cols(), rng);
  *loss = t.mean(t.mul_const(out, w));
  return t.value(*loss)(0, 0);
}

// Largest |analytic - central difference| relative to max(|.|, 1e-3).
double check_op(const Build& build, const Matrix& x0) {
  Tape tape;
  const Var x = tape.variable(x0);
  Var loss;
  scalar_of(tape, build(tape, x), &loss);
  tape.backward(loss);
  const Matrix analytic = tape.grad(x);

  auto eval = [&](const Matrix& xv) {
    Tape t;
    Var l;
    return scalar_of(t, build(t, t.constant(xv)), &l);
  };
  const double h = 1e-6;
  double worst = 0.0;
  Matrix xp = x0;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    xp.data()[i] = x0.data()[i] + h;
    const double up = eval(xp);
    xp.data()[i] = x0.data()[i] - h;
    const double down = eval(xp);
    xp.data()[i] = x0.data()[i];
    const double numeric = (up - down) / (2 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3}));
  }
  return worst;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  return standard_normal(r, c, rng);
}

}  // namespace

TEST_SUITE("tape") {
  TEST_CASE("forward values") {
    Tape t;
    Matrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 0.5, -1, 2, 0;
    const Var va = t.constant(a), vb = t.constant(b);
    CHECK(t.value(t.matmul(va, vb)).isApprox(a * b));
    CHECK(t.value(t.mul(va, vb)).isApprox(a.cwiseProduct(b)));
    CHECK(t.value(t.sum_cols(va)) == Eigen::Vector2d(3, 7));
    CHECK(t.value(t.mean(va))(0, 0) == 2.5);
    const Matrix lse = t.value(t.logsumexp_rows(va));
    CHECK(lse(0, 0) == doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0))));
    Matrix col(4, 1);
    col << 1, 2, 3, 4;
    const Matrix r = t.value(t.reshape_rows(t.constant(col), 2, 2));
    CHECK(r(0, 1) == 2.0);
    CHECK(r(1, 0) == 3.0);
    CHECK(t.value(t.clamp(va, 1.5, 3.5)) == (Matrix(2, 2) << 1.5, 2, 3, 3.5).finished());
  }

  TEST_CASE("tanh helper agrees with the standard library") {
    const Matrix x = 4.0 * random_matrix(50, 3, 7);
    const Matrix y = ad::tanh_values(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(std::abs(y.data()[i] - std::tanh(x.data()[i])) < 1e-14);
  }

  TEST_CASE("gradients of every operation match central differences") {
    const Matrix x = random_matrix(4, 3, 1);
    const Matrix other = random_matrix(4, 3, 2);
    const Matrix right = random_matrix(3, 2, 3);
    const Matrix row = random_matrix(1, 3, 4);
    const Matrix col = random_matrix(4, 1, 5);
    const double tol = 1e-6;

    CHECK(check_op([&](Tape& t, Var v) { return t.matmul(v, t.constant(right)); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.matmul(t.constant(right.transpose()), v); }, random_matrix(3, 2, 9)) <
          tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.add(v, t.constant(other)); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.sub(t.constant(other), v); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.mul(v, v); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.add_row(v, t.constant(row)); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.add_row(t.constant(other), v); }, row) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.sub_col(v, t.constant(col)); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.sub_col(t.constant(other), v); }, col) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.add_const(v, other); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.mul_const(v, other); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.scale(v, -2.5); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.add_scalar(v, 3.0); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.tanh(v); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.softplus(v); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.exp(v); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.log(v); }, x.cwiseAbs().array() + 0.5) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.square(v); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.clamp(v, -0.7, 0.9); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.cols(v, 1, 2); }, x) < tol);
    CHECK(check_op(
              [&](Tape& t, Var v) {
                const Var parts[] = {t.cols(v, 2, 1), v, t.constant(other)};
                return t.concat_cols(parts);
              },
              x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.sum_cols(v); }, x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.logsumexp_rows(v); }, 10.0 * x) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.reshape_rows(v, 3, 4); }, random_matrix(12, 1, 6)) < tol);
    CHECK(check_op([&](Tape& t, Var v) { return t.mean(v); }, x) < tol);
  }

  TEST_CASE("a node used several times accumulates its adjoints") {
    Tape t;
    const Var x = t.variable(Matrix::Constant(1, 1, 3.0));
    // f = x*x + 2x + tanh(x)
    const Var f = t.add(t.add(t.mul(x, x), t.scale(x, 2.0)), t.tanh(x));
    t.backward(f);
    CHECK(t.grad(x)(0, 0) == doctest::Approx(2 * 3.0 + 2.0 + 1.0 - std::tanh(3.0) * std::tanh(3.0)));
  }

  TEST_CASE("constants receive no adjoint and unreached nodes stay zero") {
    Tape t;
    const Var x = t.variable(Matrix::Constant(2, 2, 1.0));
    const Var c = t.constant(Matrix::Constant(2, 2, 2.0));
    const Var unused = t.variable(Matrix::Constant(3, 1, 1.0));
    const Var y = t.mean(t.mul(x, c));
    t.backward(y);
    CHECK(t.grad(x).isApprox(Matrix::Constant(2, 2, 0.5)));
    CHECK(t.grad(unused) == Matrix::Zero(3, 1));
    CHECK(t.grad(c) == Matrix::Zero(2, 2));
  }

  TEST_CASE("backward needs a scalar output") {
    Tape t;
    const Var x = t.variable(Matrix::Constant(2, 2, 1.0));
    CHECK_THROWS_AS(t.backward(x), InvalidArgument);
  }

  TEST_CASE("shape mismatches are rejected") {
    Tape t;
    const Var a = t.constant(Matrix::Zero(2, 3));
    const Var b = t.constant(Matrix::Zero(2, 2));
    CHECK_THROWS_AS(t.add(a, b), InvalidArgument);
    CHECK_THROWS_AS(t.matmul(a, a), InvalidArgument);
    CHECK_THROWS_AS(t.reshape_rows(a, 3, 3), InvalidArgument);
  }
}
