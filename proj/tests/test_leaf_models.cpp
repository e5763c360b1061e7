#include <cmath>
#include <limits>

#include "doctest.h"
#include "mbt/design.hpp"
#include "mbt/errors.hpp"
#include "mbt/leaf_models.hpp"
#include "mbt/rng.hpp"

using namespace mbt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_design(Rng& rng, int n, int p) {
  MatrixXd X(n, p + 1);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int j = 1; j <= p; ++j) X(i, j) = rng.normal();
  }
  return X;
}

VectorXd random_vector(Rng& rng, int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

double recomputed_sse(const FittedLeafModel& m, const MatrixXd& X, const VectorXd& y) {
  return (y - X * m.coefficients).squaredNorm();
}

// Best BIC over all subsets of the non-intercept columns.
std::vector<bool> best_subset_bic(const MatrixXd& X, const VectorXd& y) {
  const int p = static_cast<int>(X.cols()) - 1;
  const double n = static_cast<double>(X.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> keep;
  for (int mask = 0; mask < (1 << p); ++mask) {
    std::vector<int> cols{0};
    for (int j = 0; j < p; ++j) {
      if (mask >> j & 1) cols.push_back(j + 1);
    }
    MatrixXd S(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) S.col(static_cast<Eigen::Index>(k)) = X.col(cols[k]);
    const VectorXd b = (S.transpose() * S).ldlt().solve(S.transpose() * y);
    const double sse = (y - S * b).squaredNorm();
    const double bic = n * std::log(sse / n) + static_cast<double>(cols.size()) * std::log(n);
    if (bic < best) {
      best = bic;
      keep.assign(static_cast<std::size_t>(p) + 1, false);
      for (int c : cols) keep[static_cast<std::size_t>(c)] = true;
    }
  }
  return keep;
}

}  // namespace

TEST_SUITE("leaf_models") {

TEST_CASE("exact line and constant target") {
  MatrixXd X(4, 2);
  X << 1, 0, 1, 1, 1, 2, 1, 3;
  VectorXd y = 2.0 * X.col(1);
  auto m = fit_linear(X, y);
  CHECK(std::abs(m.coefficients(0)) < 1e-12);
  CHECK(m.coefficients(1) == doctest::Approx(2.0));
  CHECK(m.sse < 1e-20);

  VectorXd c = VectorXd::Constant(4, 3.5);
  auto mc = fit_linear(X, c);
  CHECK(mc.coefficients(0) == doctest::Approx(3.5));
  CHECK(std::abs(mc.coefficients(1)) < 1e-12);
  CHECK(mc.sse < 1e-20);
}

TEST_CASE("ols matches the normal-equation oracle") {
  Rng rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    MatrixXd X = random_design(rng, 20, 2);
    VectorXd y = random_vector(rng, 20);
    const VectorXd oracle = (X.transpose() * X).inverse() * X.transpose() * y;
    auto m = fit_linear(X, y);
    CHECK((m.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(m.effective_df == 3.0);
    CHECK(std::abs(m.sse - recomputed_sse(m, X, y)) <= 1e-8 * std::max(1.0, m.sse));
    const VectorXd r = y - predict(m, X);
    CHECK((X.transpose() * r).cwiseAbs().maxCoeff() < 1e-6 * y.cwiseAbs().maxCoeff() * 20);
  }
}

TEST_CASE("collinear column is dropped left to right") {
  Rng rng(2);
  MatrixXd X = random_design(rng, 30, 2);
  MatrixXd Z(30, 4);
  Z << X, 2.0 * X.col(1) - X.col(2);
  VectorXd y = random_vector(rng, 30);
  auto m = fit_linear(Z, y);
  CHECK(m.active == std::vector<bool>{true, true, true, false});
  CHECK(m.coefficients(3) == 0.0);
  CHECK(m.effective_df == 3.0);
  CHECK(m.sse == doctest::Approx(fit_linear(X, y).sse).epsilon(1e-10));
}

TEST_CASE("adding a column never increases ols sse") {
  Rng rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    MatrixXd X = random_design(rng, 25, 4);
    VectorXd y = random_vector(rng, 25);
    double prev = std::numeric_limits<double>::infinity();
    for (int q = 1; q <= 5; ++q) {
      const double sse = fit_linear(X.leftCols(q), y).sse;
      CHECK(sse <= prev + 1e-10);
      prev = sse;
    }
  }
}

TEST_CASE("ridge: zero penalty, closed form, huge penalty") {
  Rng rng(4);
  MatrixXd X = random_design(rng, 40, 3);
  VectorXd y = random_vector(rng, 40);
  auto ols = fit_linear(X, y);
  auto r0 = fit_ridge(X, y, 0.0);
  CHECK((ols.coefficients - r0.coefficients).cwiseAbs().maxCoeff() < 1e-10);

  MatrixXd X1 = X.leftCols(2);
  VectorXd xc = X1.col(1).array() - X1.col(1).mean();
  VectorXd yc = y.array() - y.mean();
  for (double lambda : {0.5, 3.0, 40.0}) {
    const double oracle = xc.dot(yc) / (xc.squaredNorm() + lambda);
    auto m = fit_ridge(X1, y, lambda);
    CHECK(m.coefficients(1) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(std::abs(m.sse - recomputed_sse(m, X1, y)) <= 1e-8 * m.sse);
  }

  auto big = fit_ridge(X, y, 1e12);
  CHECK(big.coefficients.tail(3).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(big.coefficients(0) == doctest::Approx(y.mean()).epsilon(1e-8));
}

TEST_CASE("lasso without penalty equals ols") {
  Rng rng(5);
  MatrixXd X = random_design(rng, 60, 3);
  VectorXd y = random_vector(rng, 60);
  auto ols = fit_linear(X, y);
  auto l0 = fit_lasso(X, y, 0.0);
  CHECK((ols.coefficients - l0.coefficients).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("lasso bic picks the strong predictor like best subset") {
  Rng rng(6);
  int agree = 0;
  for (int rep = 0; rep < 10; ++rep) {
    MatrixXd X = random_design(rng, 200, 8);
    VectorXd y(200);
    for (int i = 0; i < 200; ++i) y(i) = 4.0 * X(i, 3) + rng.normal(0.0, 0.1);
    auto m = fit_lasso_bic(X, y);
    const std::vector<bool> oracle = best_subset_bic(X, y);
    CHECK(oracle[3]);
    bool same = true;
    for (int j = 1; j <= 8; ++j) {
      same = same && (m.coefficients(j) != 0.0) == oracle[static_cast<std::size_t>(j)];
    }
    agree += same;
    CHECK(m.coefficients(3) != 0.0);
    CHECK(m.effective_df == static_cast<double>((m.coefficients.array() != 0.0).count()));
    CHECK(std::abs(m.sse - recomputed_sse(m, X, y)) <= 1e-8 * m.sse);
  }
  // Best subset occasionally admits a noise column the path never reaches.
  CHECK(agree >= 8);
}

TEST_CASE("lasso df cap and lambda max") {
  Rng rng(7);
  MatrixXd X = random_design(rng, 100, 5);
  VectorXd y = X.rightCols(5) * VectorXd::LinSpaced(5, 1.0, 3.0) + random_vector(rng, 100);
  auto capped = fit_lasso_bic(X, y, 1);
  CHECK(capped.effective_df == 1.0);
  CHECK(capped.coefficients.tail(5).isZero(0.0));
  CHECK(capped.coefficients(0) == doctest::Approx(y.mean()));
  auto three = fit_lasso_bic(X, y, 3);
  CHECK(three.effective_df <= 3.0);

  // lambda_max on standardized columns: max |x_j' (y - ybar)| / (n sd_j)
  double lmax = 0.0;
  for (int j = 1; j <= 5; ++j) {
    VectorXd xc = X.col(j).array() - X.col(j).mean();
    const double sd = std::sqrt(xc.squaredNorm() / 100.0);
    lmax = std::max(lmax, std::abs(xc.dot(y)) / (100.0 * sd));
  }
  auto at = fit_lasso(X, y, lmax * (1.0 + 1e-9));
  CHECK(at.coefficients.tail(5).isZero(0.0));
  auto below = fit_lasso(X, y, lmax * 0.95);
  CHECK(!below.coefficients.tail(5).isZero(0.0));
}

TEST_CASE("hat basis properties") {
  HatBasis h({0.0, 1.0, 2.5, 4.0, 7.0});
  std::vector<double> out(5);
  for (std::size_t j = 0; j < 5; ++j) {
    h.evaluate(h.knots()[j], out);
    for (std::size_t k = 0; k < 5; ++k) CHECK(out[k] == (k == j ? 1.0 : 0.0));
  }
  for (std::size_t j = 0; j + 1 < 5; ++j) {
    h.evaluate(0.5 * (h.knots()[j] + h.knots()[j + 1]), out);
    CHECK(out[j] == doctest::Approx(0.5));
    CHECK(out[j + 1] == doctest::Approx(0.5));
  }
  Rng rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    h.evaluate(rng.uniform(0.0, 7.0), out);
    double s = 0.0;
    for (double v : out) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0));
  }
  std::vector<double> x(100);
  for (auto& v : x) v = rng.uniform();
  MatrixXd B = bspline_basis(x, 5);
  CHECK(B.cols() == 5);
  CHECK((B.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("prediction on a 2x2 case and intercept only") {
  FittedLeafModel m;
  m.coefficients = VectorXd(2);
  m.coefficients << 1.5, -2.0;
  MatrixXd X(2, 2);
  X << 1, 3, 1, -1;
  VectorXd p = predict(m, X);
  CHECK(p(0) == doctest::Approx(1.5 - 6.0));
  CHECK(p(1) == doctest::Approx(1.5 + 2.0));

  MatrixXd ones = MatrixXd::Ones(5, 1);
  Rng rng(9);
  auto c = fit_linear(ones, random_vector(rng, 5));
  VectorXd pc = predict(c, ones);
  CHECK((pc.array() - pc(0)).abs().maxCoeff() == 0.0);
}

TEST_CASE("score matrix matches finite differences of the loss") {
  Rng rng(10);
  MatrixXd X = random_design(rng, 30, 3);
  VectorXd y = random_vector(rng, 30);
  auto m = fit_linear(X, y);
  ScoreMatrix sm = score_matrix(m, X, y);
  REQUIRE(sm.scores.cols() == 4);
  CHECK(sm.scores.colwise().sum().cwiseAbs().maxCoeff() < 1e-9);
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      VectorXd tp = m.coefficients;
      VectorXd tm = m.coefficients;
      tp(j) += h;
      tm(j) -= h;
      const double lp = 0.5 * std::pow(y(i) - X.row(i).dot(tp), 2);
      const double lm = 0.5 * std::pow(y(i) - X.row(i).dot(tm), 2);
      const double grad = (lp - lm) / (2 * h);
      CHECK(std::abs(-grad - sm.scores(i, j)) < 1e-5);
    }
  }
  MatrixXd Xl(3, 2);
  Xl << 1, 0, 1, 1, 1, 2;
  VectorXd yl(3);
  yl << 1, 3, 5;
  CHECK(score_matrix(fit_linear(Xl, yl), Xl, yl).scores.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(LeafModelSpec::ridge(-1.0).validate(), ConfigError);
  CHECK_THROWS_AS(LeafModelSpec::lasso_bic(0).validate(), ConfigError);
  CHECK_NOTHROW(LeafModelSpec::lasso_bic(1).validate());
}

}  // TEST_SUITE
