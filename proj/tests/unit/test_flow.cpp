#include <doctest.h>

#include <numbers>

#include "ahsnpe/flow.hpp"
#include "support.hpp"

using namespace ahsnpe;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Standardizer offset_standardizer(int d, int m) {
  Standardizer s = Standardizer::identity(d, m);
  s.theta_mean = Vector::LinSpaced(d, 0.5, -0.5);
  s.theta_sd = Vector::LinSpaced(d, 2.0, 0.7);
  s.x_mean = Vector::Constant(m, 0.3);
  s.x_sd = Vector::Constant(m, 1.5);
  return s;
}

/// Random parameters pushed away from the near-identity initialisation.
ConditionalDensityEstimator random_estimator(const EstimatorSpec& spec, std::uint64_t seed, double spread = 0.3) {
  Rng rng(seed);
  Vector p = ConditionalDensityEstimator::initial_parameters(spec, rng);
  p += spread * standard_normal(p.size(), 1, rng);
  return ConditionalDensityEstimator(spec, offset_standardizer(spec.theta_dim, spec.context_dim), p);
}

void set_block(const ParamLayout& layout, Vector& p, const std::string& name, const Matrix& value) {
  const auto& b = layout.block(name);
  REQUIRE(b.rows == value.rows());
  REQUIRE(b.cols == value.cols());
  p.segment(b.offset, b.rows * b.cols) = Eigen::Map<const Vector>(value.data(), value.size());
}

double inverse_softplus(double y) { return std::log(std::expm1(y)); }

/// Single-component MDN with no hidden layer whose output is N(mean, (U^T U)^{-1})
/// for every context.
ConditionalDensityEstimator fixed_gaussian_mdn(const Vector& mean, const Matrix& upper) {
  const int d = static_cast<int>(mean.size());
  const EstimatorSpec spec{EstimatorKind::kMdn, 0, 1, 1, d, 1};
  const ParamLayout layout = make_layout(spec);
  Vector p = Vector::Zero(layout.size());
  set_block(layout, p, "bmu", mean.transpose());
  RowVector diag(d);
  for (int r = 0; r < d; ++r) diag[r] = inverse_softplus(upper(r, r));
  set_block(layout, p, "bdiag", diag);
  if (d > 1) {
    RowVector off(d * (d - 1) / 2);
    int k = 0;
    for (int r = 0; r < d; ++r)
      for (int c = r + 1; c < d; ++c) off[k++] = upper(r, c);
    set_block(layout, p, "boff", off);
  }
  return ConditionalDensityEstimator(spec, Standardizer::identity(d, 1), p);
}

Matrix uniform_context(Eigen::Index n, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix x(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = u(rng);
  return x;
}

}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("spec validation") {
    CHECK_NOTHROW(EstimatorSpec{}.validate());
    CHECK_THROWS_AS((EstimatorSpec{EstimatorKind::kMaf, 0, 5, 1, 1, 1}.validate()), InvalidArgument);
    CHECK_NOTHROW((EstimatorSpec{EstimatorKind::kMdn, 0, 1, 2, 1, 1}.validate()));
    CHECK_THROWS_AS((EstimatorSpec{EstimatorKind::kMdn, 8, 1, 0, 1, 1}.validate()), InvalidArgument);
    CHECK_THROWS_AS((EstimatorSpec{EstimatorKind::kMaf, 8, 2, 1, 0, 1}.validate()), InvalidArgument);
    CHECK(estimator_kind_from_string("mdn") == EstimatorKind::kMdn);
    CHECK_THROWS_AS(estimator_kind_from_string("nsf"), InvalidArgument);
  }

  TEST_CASE("untrained estimators refuse to evaluate") {
    const ConditionalDensityEstimator est;
    CHECK_FALSE(est.trained());
    CHECK_THROWS_AS(est.log_prob(Vector::Zero(1), Vector::Zero(1)), InvalidArgument);
    Rng rng(1);
    CHECK_THROWS_AS(est.sample(Vector::Zero(1), 3, rng), InvalidArgument);
  }

  TEST_CASE("standard Normal MDN at its mode") {
    for (int d : {1, 2, 3}) {
      const auto est = fixed_gaussian_mdn(Vector::Zero(d), Matrix::Identity(d, d));
      CHECK(est.log_prob(Vector::Zero(d), Vector::Constant(1, 4.2)) == doctest::Approx(-0.5 * d * kLog2Pi));
    }
  }

  TEST_CASE("identity MAF reproduces the base Normal") {
    const EstimatorSpec spec{EstimatorKind::kMaf, 16, 4, 1, 3, 2};
    Rng rng(2);
    const ConditionalDensityEstimator est(spec, Standardizer::identity(3, 2),
                                          ConditionalDensityEstimator::initial_parameters(spec, rng, true));
    const Vector theta = Eigen::Vector3d(0.3, -1.2, 2.0);
    CHECK(est.log_prob(theta, Eigen::Vector2d(1, -1)) ==
          doctest::Approx(-0.5 * 3 * kLog2Pi - 0.5 * theta.squaredNorm()).epsilon(1e-12));

    const Eigen::Index n = 20000;
    const Matrix s = est.sample(Eigen::Vector2d(0.5, 0.5), n, rng);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(s.col(k).mean()) < 3.0 / std::sqrt(static_cast<double>(n)));
  }

  TEST_CASE("log densities integrate to one") {
    for (auto kind : {EstimatorKind::kMaf, EstimatorKind::kMdn}) {
      const EstimatorSpec spec{kind, 8, 3, 3, 1, 1};
      const auto est = random_estimator(spec, 5, 0.5);
      const Vector x = Vector::Constant(1, 0.8);
      Rng rng(6);
      const Matrix s = est.sample(x, 20000, rng);
      const double m = s.mean();
      const double sd = std::sqrt((s.array() - m).square().mean());
      // Trapezoid rule over +-10 SD.
      const int steps = 40000;
      const double lo = m - 10 * sd, hi = m + 10 * sd, h = (hi - lo) / steps;
      Matrix grid(steps + 1, 1);
      for (int k = 0; k <= steps; ++k) grid(k, 0) = lo + k * h;
      const Vector lp = est.log_prob_batch(grid, Matrix::Constant(steps + 1, 1, 0.8));
      double integral = 0.0;
      for (int k = 0; k <= steps; ++k) integral += (k == 0 || k == steps ? 0.5 : 1.0) * std::exp(lp[k]) * h;
      INFO(to_string(kind));
      CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
    }
  }

  TEST_CASE("batch and single evaluation agree") {
    const auto est = random_estimator(EstimatorSpec{EstimatorKind::kMaf, 8, 2, 1, 2, 3}, 9);
    Rng rng(3);
    const Matrix theta = standard_normal(5, 2, rng);
    const Matrix x = standard_normal(5, 3, rng);
    const Vector batch = est.log_prob_batch(theta, x);
    for (Eigen::Index i = 0; i < 5; ++i)
      CHECK(batch[i] == doctest::Approx(est.log_prob(theta.row(i).transpose(), x.row(i).transpose())).epsilon(1e-12));
  }

  TEST_CASE("single-component MDN samples have the component moments") {
    Vector mean(2);
    mean << 1.0, -2.0;
    Matrix upper(2, 2);
    upper << 1.5, -0.4, 0.0, 0.8;
    const auto est = fixed_gaussian_mdn(mean, upper);
    const Matrix cov = (upper.transpose() * upper).inverse();
    Rng rng(10);
    const Matrix s = est.sample(Vector::Zero(1), 100000, rng);
    CHECK((sample_mean(s) - mean).cwiseAbs().maxCoeff() < 0.02);
    CHECK((sample_covariance(s, true) - cov).cwiseAbs().maxCoeff() < 0.03);
  }

  TEST_CASE("MAF inverse and forward are mutual inverses") {
    const EstimatorSpec spec{EstimatorKind::kMaf, 12, 4, 1, 3, 2};
    const auto est = random_estimator(spec, 11, 0.4);
    Rng rng(12);
    const Matrix z = standard_normal(1000, 3, rng);
    const Matrix x = standard_normal(1000, 2, rng);
    const Matrix theta = est.inverse(z, x);
    const auto [z_back, logdet] = est.forward(theta, x);
    CHECK((z_back - z).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("MAF log-determinant equals the finite-difference Jacobian") {
    for (int d : {1, 2, 3}) {
      const EstimatorSpec spec{EstimatorKind::kMaf, 10, 3, 1, d, 1};
      const auto est = random_estimator(spec, 20 + static_cast<std::uint64_t>(d), 0.4);
      Rng rng(13);
      for (int rep = 0; rep < 5; ++rep) {
        const Matrix theta = standard_normal(1, d, rng);
        const Matrix x = standard_normal(1, 1, rng);
        const auto [z, logdet] = est.forward(theta, x);
        Matrix jac(d, d);
        const double h = 1e-6;
        for (int j = 0; j < d; ++j) {
          Matrix up = theta, down = theta;
          up(0, j) += h;
          down(0, j) -= h;
          jac.col(j) = ((est.forward(up, x).first - est.forward(down, x).first) / (2 * h)).transpose();
        }
        CHECK(std::log(std::abs(jac.determinant())) == doctest::Approx(logdet[0]).epsilon(1e-4));
      }
    }
  }

  TEST_CASE("reverse-mode gradients match finite differences") {
    SUBCASE("MDN") {
      const auto est = random_estimator(EstimatorSpec{EstimatorKind::kMdn, 8, 1, 3, 2, 3}, 30);
      CHECK(grad_check(est, Eigen::Vector2d(0.4, -0.3), Eigen::Vector3d(0.1, 1.0, -0.5)) < 1e-4);
    }
    SUBCASE("MAF") {
      const auto est = random_estimator(EstimatorSpec{EstimatorKind::kMaf, 8, 3, 1, 3, 2}, 31);
      CHECK(grad_check(est, Eigen::Vector3d(0.4, -0.3, 1.2), Eigen::Vector2d(0.1, 1.0)) < 1e-4);
    }
    SUBCASE("MDN without a hidden layer") {
      const auto est = random_estimator(EstimatorSpec{EstimatorKind::kMdn, 0, 1, 2, 2, 1}, 32);
      CHECK(grad_check(est, Eigen::Vector2d(0.4, -0.3), Vector::Constant(1, 0.2)) < 1e-4);
    }
    SUBCASE("empty gradient vectors") { CHECK(max_relative_error(Vector(), Vector()) == 0.0); }
  }

  TEST_CASE("standardizer") {
    Rng rng(40);
    const Matrix theta = 3.0 * standard_normal(500, 2, rng).array() + 1.0;
    const Matrix x = standard_normal(500, 3, rng);
    const auto st = Standardizer::fit(theta, x);
    const Matrix u = st.theta_forward(theta);
    CHECK(sample_mean(u).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(st.theta_inverse(u).isApprox(theta, 1e-12));
    Matrix constant = theta;
    constant.col(1).setConstant(2.0);
    CHECK_THROWS_AS(Standardizer::fit(constant, x), InvalidArgument);
  }

  TEST_CASE("maximum-likelihood training") {
    // theta | x ~ N(x, 1) with x uniform on (-3, 3).
    Rng rng(50);
    const Eigen::Index n = 20000;
    const Matrix x = uniform_context(n, -3, 3, rng);
    const Matrix theta = x + standard_normal(n, 1, rng);
    TrainConfig cfg;
    cfg.learning_rate = 2e-3;
    cfg.max_epochs = 25;
    cfg.seed = 1;
    TrainingReport report;
    const EstimatorSpec spec{EstimatorKind::kMdn, 16, 1, 1, 1, 1};
    const auto est = fit_npe(spec, theta, x, cfg, &report);
    Rng srng(51);
    const Matrix s = est.sample(Vector::Zero(1), 20000, srng);
    CHECK(std::abs(s.mean()) < 0.05);
    REQUIRE(report.train_loss.size() >= 2);
    CHECK(report.train_loss.back() <= report.train_loss.front());
    CHECK(report.best_epoch >= 1);
  }

  TEST_CASE("training input checks") {
    Rng rng(52);
    const Matrix x = uniform_context(300, -3, 3, rng);
    const EstimatorSpec spec{EstimatorKind::kMdn, 4, 1, 1, 1, 1};
    CHECK_THROWS_AS(fit_npe(spec, Matrix::Constant(300, 1, 1.0), x, TrainConfig{}), InvalidArgument);
    CHECK_THROWS_AS(fit_npe(spec, x.topRows(99), x.topRows(99), TrainConfig{}), InvalidArgument);
    CHECK_THROWS_AS(fit_npe(spec, x, x.topRows(200), TrainConfig{}), InvalidArgument);
    TrainConfig bad;
    bad.val_fraction = 1.0;
    CHECK_THROWS_AS(fit_npe(spec, x, x, bad), InvalidArgument);
  }

  TEST_CASE("training is deterministic per seed") {
    Rng rng(60);
    const Matrix x = uniform_context(600, -1, 1, rng);
    const Matrix theta = 2.0 * x + 0.5 * standard_normal(600, 1, rng);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.batch_size = 64;
    cfg.seed = 7;
    const EstimatorSpec spec{EstimatorKind::kMaf, 8, 2, 1, 1, 1};
    const auto a = fit_npe(spec, theta, x, cfg);
    const auto b = fit_npe(spec, theta, x, cfg);
    CHECK(a.parameters() == b.parameters());
    const Vector log_w = Vector::LinSpaced(600, -1, 1);
    CHECK(fit_atomic(spec, theta, x, log_w, cfg).parameters() == fit_atomic(spec, theta, x, log_w, cfg).parameters());
  }

  TEST_CASE("atomic loss") {
    const auto est = random_estimator(EstimatorSpec{EstimatorKind::kMaf, 8, 2, 1, 1, 1}, 70);
    Rng data_rng(71);
    const Matrix theta = standard_normal(32, 1, data_rng);
    const Matrix x = theta + standard_normal(32, 1, data_rng);
    const Vector log_w = standard_normal(32, 1, data_rng);

    SUBCASE("smallest legal configuration is finite") {
      Rng rng(1);
      const double loss = atomic_loss(est, theta.topRows(2), x.topRows(2), log_w.head(2), 2, rng);
      CHECK(std::isfinite(loss));
      CHECK(loss > 0.0);
      TrainConfig cfg;
      cfg.batch_size = 2;
      cfg.n_atoms = 2;
      cfg.max_epochs = 1;
      const Matrix t100 = standard_normal(100, 1, data_rng);
      const auto fitted = fit_atomic(est.spec(), t100, t100 + standard_normal(100, 1, data_rng),
                                     Vector::Zero(100), cfg);
      CHECK(fitted.parameters().allFinite());
    }
    SUBCASE("a constant shift of the log weights leaves the loss unchanged") {
      Rng a(2), b(2);
      const double base = atomic_loss(est, theta, x, log_w, 10, a);
      const double shifted = atomic_loss(est, theta, x, (log_w.array() + 17.3).matrix(), 10, b);
      CHECK(shifted == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("with all atoms equal to the item the loss is log M") {
      const Matrix same = Matrix::Constant(8, 1, 0.4);
      Rng rng(3);
      CHECK(atomic_loss(est, same, x.topRows(8), Vector::Zero(8), 5, rng) == doctest::Approx(std::log(5.0)));
    }
    SUBCASE("non-finite weights name the parameter") {
      Vector bad = Vector::Zero(200);
      bad[17] = std::numeric_limits<double>::infinity();
      Rng rng(4);
      const Matrix t = standard_normal(200, 1, rng);
      try {
        fit_atomic(est.spec(), t, t, bad, TrainConfig{});
        FAIL("expected an error");
      } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("theta") != std::string::npos);
      }
    }
    SUBCASE("argument checks") {
      Rng rng(5);
      CHECK_THROWS_AS(atomic_loss(est, theta.topRows(1), x.topRows(1), log_w.head(1), 2, rng), InvalidArgument);
      CHECK_THROWS_AS(atomic_loss(est, theta, x, log_w, 1, rng), InvalidArgument);
    }
  }

  TEST_CASE("proposal checks in SNPE training") {
    Rng rng(80);
    const Matrix theta = standard_normal(200, 1, rng);
    const Gaussian prior(Vector::Zero(1), Matrix::Identity(1, 1));
    const EstimatorSpec spec{EstimatorKind::kMdn, 4, 1, 1, 1, 1};
    CHECK_THROWS_AS(fit_snpe_atomic(spec, theta, theta, prior, ProposalMixture(), TrainConfig{}), InvalidArgument);
    const auto wrong_dim = ProposalMixture().add_component(Vector::Zero(2), Matrix::Identity(2, 2), 200, "p");
    CHECK_THROWS_AS(fit_snpe_atomic(spec, theta, theta, prior, wrong_dim, TrainConfig{}), InvalidArgument);
  }

  TEST_CASE("checkpoints round-trip exactly") {
    const auto dir = testing::scratch_dir("flow_ckpt");
    for (auto kind : {EstimatorKind::kMaf, EstimatorKind::kMdn}) {
      const auto est = random_estimator(EstimatorSpec{kind, 6, 2, 2, 2, 3}, 90);
      const auto path = (dir / (to_string(kind) + ".json")).string();
      est.save(path);
      const auto back = ConditionalDensityEstimator::load(path);
      CHECK(back.spec() == est.spec());
      CHECK(back.parameters() == est.parameters());
      CHECK(back.standardizer().theta_sd == est.standardizer().theta_sd);
      CHECK(back.log_prob(Eigen::Vector2d(0.1, 0.2), Eigen::Vector3d(1, 2, 3)) ==
            est.log_prob(Eigen::Vector2d(0.1, 0.2), Eigen::Vector3d(1, 2, 3)));
    }
    auto j = random_estimator(EstimatorSpec{}, 91).to_json();
    j["version"] = 99;
    CHECK_THROWS_AS(ConditionalDensityEstimator::from_json(j), InvalidArgument);
  }
}
