#include <doctest.h>

#include <cmath>
#include <limits>

#include "salt/errors.hpp"
#include "salt/lag_stats.hpp"
#include "salt/rng.hpp"
#include "salt/var.hpp"

using namespace salt;

namespace {

Eigen::MatrixXd random_series(Rng& rng, Eigen::Index t_len, int dim) {
  Eigen::MatrixXd y(t_len, dim);
  for (Eigen::Index t = 0; t < t_len; ++t)
    for (int i = 0; i < dim; ++i) y(t, i) = rng.normal();
  return y;
}

// Direct per-frame accumulation, no chunking or rank updates.
struct NaiveStats {
  Eigen::MatrixXd cov;
  Eigen::VectorXd sum;
  double weight_sum = 0.0;

  NaiveStats(const Eigen::MatrixXd& series, int lags, const Eigen::VectorXd& weights) {
    const int dim = static_cast<int>(series.cols());
    const int width = dim * (lags + 1);
    cov = Eigen::MatrixXd::Zero(width, width);
    sum = Eigen::VectorXd::Zero(width);
    for (Eigen::Index t = lags; t < series.rows(); ++t) {
      const double w = weights.size() == 0 ? 1.0 : weights[t - lags];
      weight_sum += w;
      Eigen::VectorXd z(width);
      for (int l = 0; l <= lags; ++l) z.segment(l * dim, dim) = series.row(t - l);
      cov += w * z * z.transpose();
      sum += w * z;
    }
  }
};

}  // namespace

TEST_CASE("lag moments match direct accumulation") {
  Rng rng(31);
  const int dim = 3, lags = 2;
  const Eigen::MatrixXd y = random_series(rng, 41, dim);
  Eigen::VectorXd w(y.rows() - lags);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform();

  WeightedLagStats stats(dim, lags);
  stats.accumulate(y, w);
  const NaiveStats truth(y, lags, w);

  CHECK(std::abs(stats.weight_sum() - truth.weight_sum) < 1e-12);
  CHECK((stats.full_cov() - truth.cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((stats.full_sum() - truth.sum).cwiseAbs().maxCoeff() < 1e-12);

  for (int l = 0; l <= lags; ++l)
    for (int lp = 0; lp <= lags; ++lp)
      CHECK((stats.cov_block(l, lp) - truth.cov.block(l * dim, lp * dim, dim, dim))
                .cwiseAbs()
                .maxCoeff() < 1e-12);
}

TEST_CASE("empty weights mean uniform weight one") {
  Rng rng(37);
  const Eigen::MatrixXd y = random_series(rng, 20, 2);
  WeightedLagStats uniform(2, 3), explicit_ones(2, 3);
  uniform.accumulate(y, Eigen::VectorXd());
  explicit_ones.accumulate(y, Eigen::VectorXd::Ones(y.rows() - 3));
  CHECK(uniform.weight_sum() == explicit_ones.weight_sum());
  CHECK((uniform.full_cov() - explicit_ones.full_cov()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((uniform.full_sum() - explicit_ones.full_sum()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("accumulation is additive across calls") {
  Rng rng(41);
  const Eigen::MatrixXd a = random_series(rng, 15, 2);
  const Eigen::MatrixXd b = random_series(rng, 9, 2);
  WeightedLagStats once(2, 1), twice(2, 1);
  once.accumulate(a, Eigen::VectorXd());
  twice.accumulate(a, Eigen::VectorXd());
  twice.accumulate(b, Eigen::VectorXd());

  const NaiveStats tb(b, 1, Eigen::VectorXd());
  CHECK(std::abs(twice.weight_sum() - once.weight_sum() - tb.weight_sum) < 1e-12);
  CHECK((twice.full_cov() - once.full_cov() - tb.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("chunk boundaries do not change the result") {
  Rng rng(43);
  // Enough scored frames to cross the internal 2048-row chunk at least once.
  const Eigen::MatrixXd y = random_series(rng, 2048 + 60, 2);
  WeightedLagStats stats(2, 2);
  stats.accumulate(y, Eigen::VectorXd());
  const NaiveStats truth(y, 2, Eigen::VectorXd());
  CHECK((stats.full_cov() - truth.cov).cwiseAbs().maxCoeff() <
        1e-10 * truth.cov.cwiseAbs().maxCoeff());
  CHECK((stats.full_sum() - truth.sum).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("moment matrix is symmetric and views alias it") {
  Rng rng(47);
  const int dim = 2, lags = 3;
  const Eigen::MatrixXd y = random_series(rng, 30, dim);
  WeightedLagStats stats(dim, lags);
  stats.accumulate(y, Eigen::VectorXd());

  CHECK((stats.full_cov() - stats.full_cov().transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((stats.design_cov() -
         stats.full_cov().block(dim, dim, dim * lags, dim * lags))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((stats.target_design_cov() - stats.full_cov().block(0, dim, dim, dim * lags))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((stats.target_cov() - stats.full_cov().topLeftCorner(dim, dim))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((stats.design_sum() - stats.full_sum().tail(dim * lags)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((stats.target_sum() - stats.full_sum().head(dim)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lag stats reject malformed input") {
  CHECK_THROWS_AS(WeightedLagStats(0, 1), ShapeError);
  CHECK_THROWS_AS(WeightedLagStats(1, 0), ShapeError);

  WeightedLagStats stats(2, 2);
  Rng rng(53);
  const Eigen::MatrixXd y = random_series(rng, 10, 2);
  CHECK_THROWS_AS(stats.accumulate(random_series(rng, 10, 3), Eigen::VectorXd()), ShapeError);
  CHECK_THROWS_AS(stats.accumulate(random_series(rng, 2, 2), Eigen::VectorXd()), DataError);
  CHECK_THROWS_AS(stats.accumulate(y, Eigen::VectorXd::Ones(3)), ShapeError);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(8);
  w[4] = -0.5;
  CHECK_THROWS_AS(stats.accumulate(y, w), DataError);
  w[4] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(stats.accumulate(y, w), DataError);
}

TEST_CASE("least-squares autoregression matches a stacked solve") {
  Rng rng(59);
  const int dim = 3, lags = 2;
  const Eigen::MatrixXd y = random_series(rng, 60, dim);
  Eigen::VectorXd w(y.rows() - lags);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = 0.2 + rng.uniform();

  WeightedLagStats stats(dim, lags);
  stats.accumulate(y, w);
  const OlsVar fit = ols_var(stats, 1e-8);
  CHECK(fit.exact);

  // Independent solve on the explicit design matrix (lags then intercept).
  const Eigen::Index scored = y.rows() - lags;
  Eigen::MatrixXd design(scored, dim * lags + 1);
  Eigen::MatrixXd target(scored, dim);
  for (Eigen::Index r = 0; r < scored; ++r) {
    const Eigen::Index t = lags + r;
    const double rw = std::sqrt(w[r]);
    for (int l = 1; l <= lags; ++l)
      design.block(r, (l - 1) * dim, 1, dim) = rw * y.row(t - l);
    design(r, dim * lags) = rw;
    target.row(r) = rw * y.row(t);
  }
  const Eigen::MatrixXd sol = design.colPivHouseholderQr().solve(target);
  CHECK((fit.coef - sol.topRows(dim * lags).transpose()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.bias - sol.bottomRows(1).transpose()).cwiseAbs().maxCoeff() < 1e-8);

  // The weighted residual moment of the solution matches a direct loop.
  const Eigen::MatrixXd cov = residual_cov(stats, fit.coef, fit.bias, 0.0);
  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index r = 0; r < scored; ++r) {
    const Eigen::Index t = lags + r;
    Eigen::VectorXd u(dim * lags);
    for (int l = 1; l <= lags; ++l) u.segment((l - 1) * dim, dim) = y.row(t - l);
    const Eigen::VectorXd resid = y.row(t).transpose() - fit.coef * u - fit.bias;
    truth += w[r] * resid * resid.transpose();
  }
  truth /= w.sum();
  CHECK((cov - truth).cwiseAbs().maxCoeff() < 1e-10);

  // The diagonal floor is additive.
  const Eigen::MatrixXd floored = residual_cov(stats, fit.coef, fit.bias, 0.25);
  CHECK(((floored - cov).diagonal().array() - 0.25).abs().maxCoeff() < 1e-14);
}

TEST_CASE("exact autoregression recovers a noiseless system") {
  // Three scored frames, three unknowns per output row: the interpolation
  // problem is exactly determined, so the solve must return the generator.
  const int dim = 2, lags = 1;
  Eigen::MatrixXd coef(dim, dim);
  coef << 0.5, -0.2, 0.1, 0.3;
  const Eigen::Vector2d bias(0.7, -0.4);

  Eigen::MatrixXd y(4, dim);
  y.row(0) << 1.0, -1.0;
  for (Eigen::Index t = 1; t < y.rows(); ++t)
    y.row(t) = (coef * y.row(t - 1).transpose() + bias).transpose();

  WeightedLagStats stats(dim, lags);
  stats.accumulate(y, Eigen::VectorXd());
  const OlsVar fit = ols_var(stats, 1e-8);
  CHECK((fit.coef - coef).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fit.bias - bias).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(residual_cov(stats, fit.coef, fit.bias, 0.0).cwiseAbs().maxCoeff() < 1e-12);
}
