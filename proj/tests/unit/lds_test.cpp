#include <doctest.h>

#include <cmath>
#include <vector>

#include "salt/errors.hpp"
#include "salt/lds.hpp"
#include "salt/model.hpp"
#include "salt/rng.hpp"
#include "salt/tensor.hpp"

using namespace salt;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

LdsParams scalar_lds(double a, double c, double q, double r, double b = 0.0,
                     double d = 0.0) {
  LdsParams p;
  p.A = Eigen::MatrixXd::Constant(1, 1, a);
  p.b = Eigen::VectorXd::Constant(1, b);
  p.Q = Eigen::MatrixXd::Constant(1, 1, q);
  p.C = Eigen::MatrixXd::Constant(1, 1, c);
  p.d = Eigen::VectorXd::Constant(1, d);
  p.R = Eigen::MatrixXd::Constant(1, 1, r);
  return p;
}

// Rotation-plus-decay latent dynamics observed through a random map; one real
// mode and one complex pair, all strictly stable.
LdsParams spiral_lds(Rng& rng, int obs_dim, double decay = 0.92, double angle = 0.5) {
  LdsParams p;
  p.A = Eigen::MatrixXd::Zero(3, 3);
  p.A(0, 0) = 0.7;
  p.A(1, 1) = decay * std::cos(angle);
  p.A(1, 2) = -decay * std::sin(angle);
  p.A(2, 1) = decay * std::sin(angle);
  p.A(2, 2) = decay * std::cos(angle);
  p.b = Eigen::Vector3d(0.1, -0.05, 0.02);
  p.Q = 0.05 * Eigen::MatrixXd::Identity(3, 3);
  p.C.resize(obs_dim, 3);
  for (int i = 0; i < obs_dim; ++i)
    for (int j = 0; j < 3; ++j) p.C(i, j) = rng.normal();
  p.d.resize(obs_dim);
  for (int i = 0; i < obs_dim; ++i) p.d[i] = rng.normal(0.0, 0.3);
  p.R = 0.02 * Eigen::MatrixXd::Identity(obs_dim, obs_dim);
  return p;
}

}  // namespace

TEST_CASE("scalar Riccati fixed point matches the quadratic root") {
  // sigma = a^2 sigma - a^2 sigma^2 / (sigma + r) + q with a=0.5, c=1, q=1,
  // r=1 reduces to sigma^2 - 0.25 sigma - 1 = 0.
  const LdsParams p = scalar_lds(0.5, 1.0, 1.0, 1.0);
  const SteadyState ss = solve_dare(p);
  const double sigma = (0.25 + std::sqrt(0.0625 + 4.0)) / 2.0;
  CHECK(std::abs(ss.Sigma_pred(0, 0) - sigma) < 1e-10);
  CHECK(std::abs(ss.K(0, 0) - sigma / (sigma + 1.0)) < 1e-10);
  CHECK(std::abs(ss.Gamma(0, 0) - 0.5 * (1.0 - sigma / (sigma + 1.0))) < 1e-10);
  CHECK(std::abs(ss.innovation_cov(0, 0) - (sigma + 1.0)) < 1e-10);
  CHECK(std::abs(ss.lambda_max - std::abs(ss.Gamma(0, 0))) < 1e-14);

  CHECK_THROWS_AS(static_cast<void>(solve_dare(scalar_lds(1.0, 1.0, 1.0, 1.0))),
                  NumericalError);
}

TEST_CASE("stationary covariance solves the Lyapunov equation") {
  const LdsParams scalar = scalar_lds(0.5, 1.0, 1.0, 1.0);
  CHECK(std::abs(stationary_latent_cov(scalar)(0, 0) - 4.0 / 3.0) < 1e-10);

  Rng rng(401);
  LdsParams p = spiral_lds(rng, 2);
  const Eigen::MatrixXd s = stationary_latent_cov(p);
  CHECK((s - p.A * s * p.A.transpose() - p.Q).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(s).info() == Eigen::Success);

  // Unstable dynamics fall back to the one-step noise.
  p.A = 1.5 * Eigen::MatrixXd::Identity(3, 3);
  CHECK((stationary_latent_cov(p) - p.Q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("real modal form reconstructs the matrix") {
  Rng rng(409);
  Eigen::MatrixXd m(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = rng.normal();

  const ModalForm modal = real_modal_form(m);
  CHECK(modal.n_real + 2 * modal.n_complex_pairs == 4);
  CHECK((modal.E * modal.Lambda * modal.E_inv - m).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((modal.E * modal.E_inv - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <
        1e-9);

  // Block structure: reals on the diagonal first, then 2x2 rotation scalings.
  for (int i = 0; i < modal.n_real; ++i)
    CHECK(std::abs(modal.Lambda(i, i) - modal.real_eigs[i]) < 1e-12);
  for (int k = 0; k < modal.n_complex_pairs; ++k) {
    const int at = modal.n_real + 2 * k;
    CHECK(modal.pair_imag[k] > 0.0);
    CHECK(std::abs(modal.Lambda(at, at) - modal.pair_real[k]) < 1e-12);
    CHECK(std::abs(modal.Lambda(at, at + 1) - modal.pair_imag[k]) < 1e-12);
    CHECK(std::abs(modal.Lambda(at + 1, at) + modal.pair_imag[k]) < 1e-12);
    CHECK(std::abs(modal.Lambda(at + 1, at + 1) - modal.pair_real[k]) < 1e-12);
  }

  // A plane rotation is a single complex pair with the expected parts.
  Eigen::MatrixXd rot(2, 2);
  const double theta = 0.8;
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  const ModalForm mrot = real_modal_form(rot);
  CHECK(mrot.n_real == 0);
  CHECK(mrot.n_complex_pairs == 1);
  CHECK(std::abs(mrot.pair_real[0] - std::cos(theta)) < 1e-12);
  CHECK(std::abs(mrot.pair_imag[0] - std::sin(theta)) < 1e-12);

  // A symmetric matrix has only real modes.
  const Eigen::MatrixXd sym = m + m.transpose();
  const ModalForm msym = real_modal_form(sym);
  CHECK(msym.n_complex_pairs == 0);
  for (int i = 1; i < 4; ++i) CHECK(msym.real_eigs[i - 1] >= msym.real_eigs[i]);
}

TEST_CASE("truncated predictor slices follow the closed-loop powers") {
  Rng rng(419);
  const LdsParams p = spiral_lds(rng, 2);
  const SteadyState ss = solve_dare(p);
  const int lags = 5;
  const TruncatedPredictor pred = truncated_kalman_coeffs(ss, p, lags);
  REQUIRE(pred.coeffs.n1() == 2);
  REQUIRE(pred.coeffs.n2() == 2);
  REQUIRE(pred.coeffs.n3() == lags);

  Eigen::MatrixXd gamma_power = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd gamma_sum = Eigen::MatrixXd::Zero(3, 3);
  for (int l = 1; l <= lags; ++l) {
    const Eigen::MatrixXd slice = p.C * gamma_power * p.A * ss.K;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(std::abs(pred.coeffs(i, j, l - 1) - slice(i, j)) < 1e-12);
    gamma_sum += gamma_power;
    gamma_power = ss.Gamma * gamma_power;
  }
  const Eigen::VectorXd bias =
      p.C * gamma_sum * (p.b - p.A * ss.K * p.d) + p.d;
  CHECK((pred.bias - bias).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((pred.noise - ss.innovation_cov).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("factored construction reproduces the truncated predictor exactly") {
  Rng rng(421);
  const LdsParams p = spiral_lds(rng, 4);
  const SteadyState ss = solve_dare(p);
  const int lags = 6;
  const TruncatedPredictor pred = truncated_kalman_coeffs(ss, p, lags);
  const ModalForm modal = real_modal_form(ss.Gamma);

  for (const FactorMode mode : {FactorMode::tucker, FactorMode::cp}) {
    const SaltParams sp = lds_to_salt(p, lags, mode);
    sp.validate();
    CHECK(sp.mode == mode);
    CHECK(sp.num_states() == 1);
    const int want_rank = mode == FactorMode::tucker
                              ? modal.n_real + 2 * modal.n_complex_pairs
                              : modal.n_real + 3 * modal.n_complex_pairs;
    CHECK(sp.rank() == want_rank);
    CHECK(sp.lags() == lags);
    if (mode == FactorMode::cp) CHECK(is_superdiagonal(sp.states[0].factors.G));

    const Tensor3 got = materialize(sp.states[0].factors);
    double gap = 0.0, scale = 0.0;
    for (int i = 0; i < got.n1(); ++i)
      for (int j = 0; j < got.n2(); ++j)
        for (int l = 0; l < got.n3(); ++l) {
          gap = std::max(gap, std::abs(got(i, j, l) - pred.coeffs(i, j, l)));
          scale = std::max(scale, std::abs(pred.coeffs(i, j, l)));
        }
    CHECK(gap < 1e-10 * std::max(1.0, scale));
    CHECK((sp.states[0].bias - pred.bias).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sp.states[0].cov - pred.noise).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("scalar construction matches the geometric filter") {
  const LdsParams p = scalar_lds(0.6, 1.3, 0.8, 0.4, 0.2, -0.1);
  const SteadyState ss = solve_dare(p);
  const int lags = 8;
  const double gamma = ss.Gamma(0, 0);
  const double ak = p.A(0, 0) * ss.K(0, 0);

  for (const FactorMode mode : {FactorMode::tucker, FactorMode::cp}) {
    const SaltParams sp = lds_to_salt(p, lags, mode);
    const Eigen::VectorXd filter = ar_filter(sp, 0, 0, 0);
    REQUIRE(filter.size() == lags);
    for (int l = 1; l <= lags; ++l) {
      const double want = p.C(0, 0) * std::pow(gamma, l - 1) * ak;
      CHECK(std::abs(filter[l - 1] - want) < 1e-12 * std::max(1.0, std::abs(want)));
    }
    // bias = c * (sum_j gamma^j) (b - a k d) + d for the scalar system
    double gsum = 0.0;
    for (int j = 0; j < lags; ++j) gsum += std::pow(gamma, j);
    const double want_bias = p.C(0, 0) * gsum * (p.b[0] - ak * p.d[0]) + p.d[0];
    CHECK(std::abs(sp.states[0].bias[0] - want_bias) < 1e-12);
  }
}

TEST_CASE("simulation is seed-deterministic and respects offsets") {
  Rng rng(431);
  const LdsParams p = spiral_lds(rng, 3);
  const Eigen::MatrixXd a = simulate_lds(p, 50, 2024);
  const Eigen::MatrixXd b = simulate_lds(p, 50, 2024);
  const Eigen::MatrixXd c = simulate_lds(p, 50, 2025);
  REQUIRE(a.rows() == 50);
  REQUIRE(a.cols() == 3);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.allFinite());

  // With a zero emission map the series is the offset plus tiny noise.
  LdsParams flat = p;
  flat.C.setZero();
  flat.R = 1e-12 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd y = simulate_lds(flat, 20, 7);
  Eigen::MatrixXd gap = y;
  gap.rowwise() -= flat.d.transpose();
  CHECK(gap.cwiseAbs().maxCoeff() < 1e-4);

  CHECK_THROWS_AS(static_cast<void>(simulate_lds(p, 0, 1)), DataError);
}

TEST_CASE("truncation bound is monotone and dominates the realized error") {
  Rng rng(433);
  const LdsParams p = spiral_lds(rng, 2);
  const SteadyState ss = solve_dare(p);
  const Eigen::MatrixXd y = simulate_lds(p, 400, 5);
  const double w_bound = innovation_drive_bound(ss, p, y);
  CHECK(w_bound > 0.0);

  double prev = truncation_error_bound(ss, p, 2, w_bound);
  for (int lags : {4, 8, 16}) {
    const double cur = truncation_error_bound(ss, p, lags, w_bound);
    CHECK(cur < prev);
    CHECK(cur > 0.0);
    prev = cur;
  }

  // Realized truncation error: exact steady-state predictions versus the
  // lag-limited model, compared on the tail where both are warmed up.
  const Eigen::Index skip = 64;
  const KalmanEval exact = kalman_steady_predictions(p, y, skip);
  for (int lags : {8, 16}) {
    const SaltParams sp = lds_to_salt(p, lags, FactorMode::tucker);
    const Eigen::Index scored = y.rows() - lags;
    const Eigen::MatrixXd approx =
        predictive_means(sp, y, Eigen::MatrixXd::Ones(scored, 1));
    const double bound = truncation_error_bound(ss, p, lags, w_bound);
    double worst = 0.0;
    for (Eigen::Index t = skip; t < y.rows(); ++t)
      worst = std::max(worst, (approx.row(t - lags) - exact.predicted_mean.row(t - skip))
                                  .cwiseAbs()
                                  .maxCoeff());
    CHECK(worst <= bound);
  }
}

TEST_CASE("steady-gain predictions match a hand-rolled filter") {
  Rng rng(439);
  const LdsParams p = spiral_lds(rng, 2);
  const Eigen::MatrixXd y = simulate_lds(p, 60, 11);
  const Eigen::Index skip = 10;
  const KalmanEval eval = kalman_steady_predictions(p, y, skip);
  REQUIRE(eval.predicted_mean.rows() == y.rows() - skip);

  const SteadyState ss = solve_dare(p);
  const Eigen::LLT<Eigen::MatrixXd> innov(ss.innovation_cov);
  const double log_det =
      2.0 * Eigen::MatrixXd(innov.matrixL()).diagonal().array().log().sum();
  Eigen::VectorXd mu =
      (Eigen::MatrixXd::Identity(3, 3) - p.A).fullPivLu().solve(p.b);
  double log_lik = 0.0;
  for (Eigen::Index t = 0; t < y.rows(); ++t) {
    const Eigen::VectorXd mean = p.C * mu + p.d;
    const Eigen::VectorXd resid = y.row(t).transpose() - mean;
    if (t >= skip) {
      CHECK((eval.predicted_mean.row(t - skip).transpose() - mean).cwiseAbs().maxCoeff() <
            1e-10);
      log_lik += -0.5 * (resid.dot(innov.solve(resid)) + 2.0 * kLog2Pi + log_det);
    }
    mu = p.A * mu + p.b + p.A * ss.K * resid;
  }
  CHECK(std::abs(eval.log_lik - log_lik) < 1e-8 * std::max(1.0, std::abs(log_lik)));

  CHECK_THROWS_AS(static_cast<void>(kalman_steady_predictions(p, y, y.rows())), DataError);
  CHECK_THROWS_AS(static_cast<void>(kalman_steady_predictions(p, y.leftCols(1), 0)),
                  ShapeError);
}
