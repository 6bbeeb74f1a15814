#include <doctest.h>

#include <cmath>
#include <limits>
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

// A stable two-regime switching autoregression for fitting exercises.
Eigen::MatrixXd switching_series(Rng& rng, Eigen::Index t_len, int n, int segment) {
  Eigen::MatrixXd a0 = 0.6 * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd a1 = -0.5 * Eigen::MatrixXd::Identity(n, n);
  a0(0, n - 1) = 0.2;
  a1(n - 1, 0) = -0.3;
  Eigen::MatrixXd y(t_len, n);
  for (int i = 0; i < n; ++i) y(0, i) = rng.normal();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const bool first = (t / segment) % 2 == 0;
    const Eigen::MatrixXd& a = first ? a0 : a1;
    for (int i = 0; i < n; ++i)
      y(t, i) = a.row(i).dot(y.row(t - 1)) + (first ? 0.1 : -0.1) + 0.3 * rng.normal();
  }
  return y;
}

double gaussian_loglik(const Eigen::MatrixXd& y, int lags, const Eigen::MatrixXd& coef,
                       const Eigen::VectorXd& bias, const Eigen::MatrixXd& cov) {
  const int n = static_cast<int>(y.cols());
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const double log_det =
      2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  double total = 0.0;
  Eigen::VectorXd u(static_cast<Eigen::Index>(n) * lags);
  for (Eigen::Index t = lags; t < y.rows(); ++t) {
    for (int l = 1; l <= lags; ++l) u.segment((l - 1) * n, n) = y.row(t - l).transpose();
    const Eigen::VectorXd r = y.row(t).transpose() - coef * u - bias;
    total += r.dot(llt.solve(r)) + n * kLog2Pi + log_det;
  }
  return -0.5 * total;
}

void check_monotone(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] >= trace[i - 1] - 1e-9 * std::max(1.0, std::abs(trace[i - 1])));
}

}  // namespace

TEST_CASE("single-state full-rank fit reaches the least-squares optimum") {
  Rng rng(301);
  const int n = 3, lags = 2;
  const Eigen::MatrixXd y = switching_series(rng, 200, n, 1 << 20);  // one regime

  FitConfig cfg;
  cfg.H = 1;
  cfg.D = n;
  cfg.L = lags;
  cfg.rank_lag = lags;
  cfg.mode = FactorMode::tucker;
  cfg.max_iters = 300;
  cfg.rel_tol = 1e-13;
  const FitResult fit = fit_em(y, cfg);

  WeightedLagStats stats(n, lags);
  stats.accumulate(y, Eigen::VectorXd());
  const OlsVar ols = ols_var(stats, cfg.ridge);
  const Eigen::MatrixXd cov = residual_cov(stats, ols.coef, ols.bias, cfg.cov_floor);
  const double want = gaussian_loglik(y, lags, ols.coef, ols.bias, cov);

  CHECK(std::abs(fit.trace.log_marginal.back() - want) < 1e-6 * std::abs(want));
  // At full rank the factored coefficients reproduce the dense solution.
  const Eigen::MatrixXd dense = coef_matrix(materialize(fit.params.states[0].factors));
  CHECK((dense - ols.coef).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("expectation maximization is monotone and self-consistent") {
  Rng rng(307);
  const Eigen::MatrixXd y = switching_series(rng, 160, 2, 40);

  for (const FactorMode mode : {FactorMode::tucker, FactorMode::cp}) {
    for (const InitMethod init : {InitMethod::kmeans, InitMethod::random}) {
      FitConfig cfg;
      cfg.H = 2;
      cfg.D = 2;
      cfg.L = 2;
      cfg.mode = mode;
      cfg.init = init;
      cfg.max_iters = 40;
      cfg.seed = 11;
      const FitResult fit = fit_em(y, cfg);

      check_monotone(fit.trace.log_marginal);
      CHECK(fit.trace.log_marginal.size() ==
            static_cast<std::size_t>(fit.trace.iterations) + 1);

      // The stored posterior and trace tail both describe the returned params.
      const HmmPosterior check = e_step(fit.params, y);
      const double tail = fit.trace.log_marginal.back();
      CHECK(std::abs(check.log_marginal - tail) < 1e-9 * std::max(1.0, std::abs(tail)));
      CHECK(std::abs(fit.trace.posterior.log_marginal - tail) <
            1e-12 * std::max(1.0, std::abs(tail)));
      CHECK(fit.trace.posterior.omega.rows() == y.rows() - cfg.L);
      fit.params.validate();
    }
  }
}

TEST_CASE("inner sweeps preserve monotonicity") {
  Rng rng(311);
  const Eigen::MatrixXd y = switching_series(rng, 120, 2, 30);
  FitConfig cfg;
  cfg.H = 2;
  cfg.D = 1;
  cfg.L = 2;
  cfg.inner_sweeps = 3;
  cfg.max_iters = 25;
  const FitResult fit = fit_em(y, cfg);
  check_monotone(fit.trace.log_marginal);
}

TEST_CASE("fits are deterministic in the seed") {
  Rng rng(313);
  const Eigen::MatrixXd y = switching_series(rng, 100, 2, 25);
  FitConfig cfg;
  cfg.H = 2;
  cfg.D = 1;
  cfg.L = 1;
  cfg.init = InitMethod::random;
  cfg.seed = 99;
  cfg.max_iters = 15;
  const FitResult a = fit_em(y, cfg);
  const FitResult b = fit_em(y, cfg);
  const auto identical = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y2) {
    return x.rows() == y2.rows() && x.cols() == y2.cols() &&
           (x - y2).cwiseAbs().maxCoeff() == 0.0;
  };
  for (int h = 0; h < 2; ++h) {
    CHECK(identical(a.params.states[h].factors.U, b.params.states[h].factors.U));
    CHECK(identical(a.params.states[h].factors.V, b.params.states[h].factors.V));
    CHECK(identical(a.params.states[h].factors.W, b.params.states[h].factors.W));
    CHECK(identical(a.params.states[h].cov, b.params.states[h].cov));
  }
  CHECK(identical(a.params.tm.pi, b.params.tm.pi));
  CHECK(a.trace.log_marginal == b.trace.log_marginal);

  cfg.seed = 100;
  const FitResult c = fit_em(y, cfg);
  CHECK_FALSE(identical(a.params.states[0].factors.U, c.params.states[0].factors.U));
}

TEST_CASE("initial parameters are well formed") {
  Rng rng(317);
  const Eigen::MatrixXd y = switching_series(rng, 90, 3, 20);

  for (const FactorMode mode : {FactorMode::tucker, FactorMode::cp}) {
    for (const InitMethod init : {InitMethod::kmeans, InitMethod::random}) {
      FitConfig cfg;
      cfg.H = 3;
      cfg.D = 2;
      cfg.L = 2;
      // A superdiagonal core ties the lag rank to D, so only tucker may shrink it.
      if (mode == FactorMode::tucker) cfg.rank_lag = 1;
      cfg.mode = mode;
      cfg.init = init;
      const SaltParams p = init_salt_params(y, cfg);
      p.validate();
      CHECK(p.num_states() == 3);
      CHECK(p.dim() == 3);
      CHECK(p.lags() == 2);
      CHECK(p.rank() == 2);
      CHECK(p.rank_lag() == (mode == FactorMode::tucker ? 1 : 2));
      if (mode == FactorMode::cp) CHECK(is_superdiagonal(p.states[0].factors.G));
      // States must start distinct or EM could never separate them.
      CHECK((p.states[0].factors.U - p.states[1].factors.U).cwiseAbs().maxCoeff() > 0.0);
    }
  }

  // Random init centers each state on the scored sample moments.
  FitConfig cfg;
  cfg.H = 2;
  cfg.D = 1;
  cfg.L = 3;
  cfg.init = InitMethod::random;
  const SaltParams p = init_salt_params(y, cfg);
  const Eigen::VectorXd mean = y.bottomRows(y.rows() - 3).colwise().mean().transpose();
  CHECK((p.states[0].bias - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((p.states[0].bias - p.states[1].bias).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("configuration and data problems are rejected up front") {
  Rng rng(331);
  const Eigen::MatrixXd y = switching_series(rng, 50, 2, 10);

  FitConfig cfg;
  cfg.H = 0;
  CHECK_THROWS_AS(static_cast<void>(fit_em(y, cfg)), DataError);
  cfg.H = 1;
  cfg.D = 3;  // rank above the observation dimension
  CHECK_THROWS_AS(static_cast<void>(fit_em(y, cfg)), DataError);
  cfg.D = 2;
  cfg.L = 1;
  cfg.rank_lag = 2;  // lag rank above the lag order
  CHECK_THROWS_AS(static_cast<void>(fit_em(y, cfg)), DataError);
  cfg.L = 2;
  cfg.rank_lag = 1;
  cfg.mode = FactorMode::cp;  // superdiagonal core cannot take a reduced lag rank
  CHECK_THROWS_AS(static_cast<void>(fit_em(y, cfg)), DataError);
  cfg.mode = FactorMode::tucker;
  cfg.rank_lag = 0;
  CHECK_THROWS_AS(static_cast<void>(fit_em(y.topRows(2), cfg)), DataError);

  Eigen::MatrixXd bad = y;
  bad(5, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(static_cast<void>(fit_em(bad, cfg)), DataError);

  cfg.max_iters = 0;
  CHECK_THROWS_AS(static_cast<void>(fit_em(y, cfg)), DataError);
  cfg.max_iters = 10;
  cfg.inner_sweeps = 0;
  CHECK_THROWS_AS(static_cast<void>(fit_em(y, cfg)), DataError);
}

TEST_CASE("likelihood depends on factors only through the composite tensor") {
  Rng rng(337);
  const Eigen::MatrixXd y = switching_series(rng, 60, 2, 15);
  FitConfig cfg;
  cfg.H = 2;
  cfg.D = 2;
  cfg.L = 2;
  cfg.init = InitMethod::random;
  cfg.seed = 7;
  SaltParams p = init_salt_params(y, cfg);

  const Eigen::MatrixXd base = emission_log_likelihoods(p, y);

  // Rescale the output factor and absorb the inverse into the core.
  SaltParams scaled = p;
  for (auto& s : scaled.states) {
    s.factors.U *= 2.0;
    const Eigen::MatrixXd g1 = 0.5 * mode_n_matricize(s.factors.G, 1);
    s.factors.G = mode_n_fold(g1, 1, s.factors.d1(), s.factors.d2(), s.factors.d3());
  }
  const Eigen::MatrixXd same = emission_log_likelihoods(scaled, y);
  CHECK((same - base).cwiseAbs().maxCoeff() < 1e-10);
}
