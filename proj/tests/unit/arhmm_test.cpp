#include <doctest.h>

#include <cmath>
#include <vector>

#include "salt/arhmm.hpp"
#include "salt/errors.hpp"
#include "salt/lag_stats.hpp"
#include "salt/model.hpp"
#include "salt/rng.hpp"
#include "salt/tensor.hpp"
#include "salt/var.hpp"

using namespace salt;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd two_regime_series(Rng& rng, Eigen::Index t_len, int n, int segment) {
  Eigen::MatrixXd y(t_len, n);
  for (int i = 0; i < n; ++i) y(0, i) = rng.normal();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const double a = (t / segment) % 2 == 0 ? 0.7 : -0.6;
    for (int i = 0; i < n; ++i) y(t, i) = a * y(t - 1, i) + 0.25 * rng.normal();
  }
  return y;
}

}  // namespace

TEST_CASE("coefficient tensor and lag-stacked matrix are inverse layouts") {
  Tensor3 coef(2, 2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 3; ++l) coef(i, j, l) = 100 * i + 10 * j + l;

  const Eigen::MatrixXd mat = coef_matrix(coef);
  REQUIRE(mat.rows() == 2);
  REQUIRE(mat.cols() == 6);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 3; ++l) CHECK(mat(i, l * 2 + j) == coef(i, j, l));

  const Tensor3 back = coef_tensor(mat, 2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 3; ++l) CHECK(back(i, j, l) == coef(i, j, l));

  CHECK_THROWS_AS(static_cast<void>(coef_tensor(mat, 2, 2)), ShapeError);
}

TEST_CASE("single-state fit is the least-squares autoregression") {
  Rng rng(501);
  const int n = 2, lags = 2;
  const Eigen::MatrixXd y = two_regime_series(rng, 150, n, 1 << 20);

  FitConfig cfg;
  cfg.H = 1;
  cfg.L = lags;
  cfg.max_iters = 50;
  cfg.rel_tol = 1e-13;
  const ArhmmFitResult fit = fit_arhmm(y, cfg);

  WeightedLagStats stats(n, lags);
  stats.accumulate(y, Eigen::VectorXd());
  const OlsVar ols = ols_var(stats, cfg.ridge);
  const Eigen::MatrixXd cov = residual_cov(stats, ols.coef, ols.bias, cfg.cov_floor);

  CHECK((coef_matrix(fit.params.states[0].coef) - ols.coef).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.params.states[0].bias - ols.bias).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.params.states[0].cov - cov).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(fit.trace.converged);
}

TEST_CASE("dense and full-rank factored fits agree on the objective") {
  Rng rng(503);
  const int n = 2, lags = 2;
  const Eigen::MatrixXd y = two_regime_series(rng, 140, n, 1 << 20);

  FitConfig cfg;
  cfg.H = 1;
  cfg.L = lags;
  cfg.max_iters = 200;
  cfg.rel_tol = 1e-13;
  const ArhmmFitResult dense = fit_arhmm(y, cfg);

  cfg.D = n;
  cfg.rank_lag = lags;
  cfg.mode = FactorMode::tucker;
  const FitResult factored = fit_em(y, cfg);

  const double a = dense.trace.log_marginal.back();
  const double b = factored.trace.log_marginal.back();
  CHECK(std::abs(a - b) < 1e-4 * std::abs(a));
}

TEST_CASE("emission table matches a direct density loop") {
  Rng rng(509);
  const int n = 2, lags = 2;
  ArhmmParams p;
  p.tm = TransitionModel::uniform(2);
  for (int h = 0; h < 2; ++h) {
    ArhmmStateParams s;
    s.coef = Tensor3(n, n, lags);
    for (double& v : s.coef.data()) v = rng.normal(0.0, 0.4);
    s.bias = Eigen::VectorXd::Zero(n);
    s.bias[0] = h ? 0.5 : -0.5;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = rng.normal(0.0, 0.3);
    s.cov = m * m.transpose() + 0.4 * Eigen::MatrixXd::Identity(n, n);
    p.states.push_back(s);
  }
  const Eigen::MatrixXd y = two_regime_series(rng, 30, n, 10);
  const Eigen::MatrixXd table = emission_log_likelihoods(p, y);
  REQUIRE(table.rows() == y.rows() - lags);

  for (int h = 0; h < 2; ++h) {
    const auto& s = p.states[h];
    const Eigen::LLT<Eigen::MatrixXd> llt(s.cov);
    const double log_det =
        2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    for (Eigen::Index t = lags; t < y.rows(); ++t) {
      const Eigen::VectorXd mean =
          contract_23(s.coef, lag_window(y, t, lags)) + s.bias;
      const Eigen::VectorXd r = y.row(t).transpose() - mean;
      const double want = -0.5 * (r.dot(llt.solve(r)) + n * kLog2Pi + log_det);
      CHECK(std::abs(table(t - lags, h) - want) < 1e-10);
    }
  }

  // One-hot predictive means reduce to the per-state forecast.
  const Eigen::Index scored = y.rows() - lags;
  Eigen::MatrixXd one_hot = Eigen::MatrixXd::Zero(scored, 2);
  one_hot.col(1).setOnes();
  const Eigen::MatrixXd means = predictive_means(p, y, one_hot);
  for (Eigen::Index r = 0; r < scored; ++r) {
    const Eigen::VectorXd want =
        contract_23(p.states[1].coef, lag_window(y, lags + r, lags)) + p.states[1].bias;
    CHECK((means.row(r).transpose() - want).cwiseAbs().maxCoeff() < 1e-12);
  }

  const std::vector<int> path = most_likely_states(p, y);
  CHECK(path == viterbi(table, p.tm));
}

TEST_CASE("expectation maximization is monotone for the dense model") {
  Rng rng(521);
  const Eigen::MatrixXd y = two_regime_series(rng, 160, 2, 40);

  for (const InitMethod init : {InitMethod::kmeans, InitMethod::random}) {
    FitConfig cfg;
    cfg.H = 2;
    cfg.L = 1;
    cfg.init = init;
    cfg.max_iters = 40;
    cfg.seed = 3;
    const ArhmmFitResult fit = fit_arhmm(y, cfg);
    for (std::size_t i = 1; i < fit.trace.log_marginal.size(); ++i)
      CHECK(fit.trace.log_marginal[i] >=
            fit.trace.log_marginal[i - 1] -
                1e-9 * std::max(1.0, std::abs(fit.trace.log_marginal[i - 1])));
    CHECK(fit.trace.log_marginal.size() ==
          static_cast<std::size_t>(fit.trace.iterations) + 1);

    const double tail = fit.trace.log_marginal.back();
    const HmmPosterior post =
        forward_backward(emission_log_likelihoods(fit.params, y), fit.params.tm);
    CHECK(std::abs(post.log_marginal - tail) < 1e-9 * std::max(1.0, std::abs(tail)));
    fit.params.validate();
  }
}

TEST_CASE("dense fits are deterministic in the seed") {
  Rng rng(523);
  const Eigen::MatrixXd y = two_regime_series(rng, 100, 2, 25);
  FitConfig cfg;
  cfg.H = 2;
  cfg.L = 1;
  cfg.init = InitMethod::random;
  cfg.seed = 17;
  cfg.max_iters = 10;
  const ArhmmFitResult a = fit_arhmm(y, cfg);
  const ArhmmFitResult b = fit_arhmm(y, cfg);
  CHECK(a.trace.log_marginal == b.trace.log_marginal);
  for (int h = 0; h < 2; ++h) {
    CHECK((coef_matrix(a.params.states[h].coef) - coef_matrix(b.params.states[h].coef))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((a.params.states[h].cov - b.params.states[h].cov).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("dense fit separates two obvious regimes") {
  Rng rng(541);
  const Eigen::MatrixXd y = two_regime_series(rng, 400, 2, 50);
  FitConfig cfg;
  cfg.H = 2;
  cfg.L = 1;
  cfg.max_iters = 60;
  cfg.prior = DirichletPrior{20.0, 1.0};
  const ArhmmFitResult fit = fit_arhmm(y, cfg);

  // The two fitted lag-1 maps should straddle the true 0.7 / -0.6 split.
  std::vector<double> diag_mean;
  for (const auto& s : fit.params.states)
    diag_mean.push_back((s.coef(0, 0, 0) + s.coef(1, 1, 0)) / 2.0);
  const double lo = std::min(diag_mean[0], diag_mean[1]);
  const double hi = std::max(diag_mean[0], diag_mean[1]);
  CHECK(hi > 0.4);
  CHECK(lo < -0.3);
}

TEST_CASE("model size formulas") {
  CHECK(param_count(ModelKind::arhmm, 7, 48, 9, 0) == 145152);
  CHECK(param_count(ModelKind::arhmm, 1, 1, 1, 1) == 1);
  CHECK(param_count(ModelKind::cp, 1, 1, 1, 1) == 4);
  CHECK(param_count(ModelKind::tucker, 1, 1, 1, 1) == 4);
  CHECK(param_count(ModelKind::slds, 1, 1, 1, 1) == 2);

  // At matched rank the factored models sit far below the dense tensor.
  const std::int64_t cp = param_count(ModelKind::cp, 7, 48, 9, 12);
  const std::int64_t tucker = param_count(ModelKind::tucker, 7, 48, 9, 12);
  const std::int64_t dense = param_count(ModelKind::arhmm, 7, 48, 9, 0);
  CHECK(cp == 7 * (2 * 48 * 12 + 9 * 12 + 12));
  CHECK(tucker == 7 * (2 * 48 * 12 + 9 * 12 + 12 * 12 * 12));
  CHECK(cp < tucker);
  CHECK(tucker < dense);

  // No overflow on large configurations.
  CHECK(param_count(ModelKind::arhmm, 100, 10000, 100, 0) == 1000000000000LL);
  CHECK_THROWS_AS(static_cast<void>(param_count(ModelKind::arhmm, 0, 1, 1, 1)), DataError);
  CHECK_THROWS_AS(static_cast<void>(param_count(ModelKind::cp, 1, 1, 1, 0)), DataError);
}

TEST_CASE("dense model validation rejects malformed parameters") {
  Rng rng(547);
  ArhmmParams p;
  p.tm = TransitionModel::uniform(1);
  ArhmmStateParams s;
  s.coef = Tensor3(2, 2, 1);
  for (double& v : s.coef.data()) v = 0.1;
  s.bias = Eigen::VectorXd::Zero(2);
  s.cov = Eigen::MatrixXd::Identity(2, 2);
  p.states.push_back(s);
  p.validate();

  ArhmmParams wrong = p;
  wrong.states[0].bias = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(wrong.validate(), ShapeError);

  wrong = p;
  wrong.states[0].coef = Tensor3(2, 3, 1);
  CHECK_THROWS_AS(wrong.validate(), ShapeError);

  const Eigen::MatrixXd y = two_regime_series(rng, 20, 2, 5);
  CHECK_THROWS_AS(static_cast<void>(emission_log_likelihoods(p, y.leftCols(1))), DataError);

  FitConfig cfg;
  cfg.H = 1;
  cfg.L = 10;
  CHECK_THROWS_AS(static_cast<void>(fit_arhmm(y.topRows(5), cfg)), DataError);
}
