#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "salt/model.hpp"
#include "salt/tensor.hpp"

namespace salt {

// Linear-Gaussian state space model:
//   x_{t+1} = A x_t + b + w_t,  w ~ N(0, Q)
//   y_t     = C x_t + d + v_t,  v ~ N(0, R)
struct LdsParams {
  Eigen::MatrixXd A;  // D x D dynamics
  Eigen::VectorXd b;  // D drift
  Eigen::MatrixXd Q;  // D x D SPD state noise
  Eigen::MatrixXd C;  // N x D emission map
  Eigen::VectorXd d;  // N offset
  Eigen::MatrixXd R;  // N x N SPD observation noise

  [[nodiscard]] int latent_dim() const { return static_cast<int>(A.rows()); }
  [[nodiscard]] int obs_dim() const { return static_cast<int>(C.rows()); }
  void validate() const;
};

// Stationary latent covariance, the fixed point of S = A S A^T + Q, when A is
// stable; falls back to Q otherwise.
[[nodiscard]] Eigen::MatrixXd stationary_latent_cov(const LdsParams& p);

// Forward simulation of the observations, x_0 ~ N(0, stationary_latent_cov).
// Draw order per frame: N observation normals, then D latent normals.
[[nodiscard]] Eigen::MatrixXd simulate_lds(const LdsParams& p, Eigen::Index steps,
                                           std::uint64_t seed);

// Steady-state one-step predictor quantities. Sigma_pred solves the Riccati
// fixed point Sigma = A Sigma A^T - A Sigma C^T (C Sigma C^T + R)^-1 C Sigma A^T + Q
// by iteration from Sigma = Q.
struct SteadyState {
  Eigen::MatrixXd Sigma_pred;      // steady predictive covariance
  Eigen::MatrixXd K;               // gain, Sigma C^T (C Sigma C^T + R)^-1
  Eigen::MatrixXd Gamma;           // closed loop, A (I - K C)
  double lambda_max = 0.0;         // spectral radius of Gamma
  Eigen::MatrixXd innovation_cov;  // C Sigma C^T + R
  int iterations = 0;
};

[[nodiscard]] SteadyState solve_dare(const LdsParams& p, double tol = 1e-12,
                                     int max_iters = 100000);

// Real modal form M = E Lambda E^-1 with real eigenvalues leading and each
// complex pair contributing a [[s, w], [-w, s]] block. Throws NumericalError
// when the eigenvector matrix is (numerically) singular or the reconstruction
// residual betrays a defective matrix.
struct ModalForm {
  int n_real = 0;
  int n_complex_pairs = 0;
  Eigen::MatrixXd E;       // modal basis
  Eigen::MatrixXd Lambda;  // block diagonal
  Eigen::MatrixXd E_inv;
  Eigen::VectorXd real_eigs;  // descending
  Eigen::VectorXd pair_real;  // s_i, pairs in descending modulus order
  Eigen::VectorXd pair_imag;  // w_i > 0
};

[[nodiscard]] ModalForm real_modal_form(const Eigen::MatrixXd& m);

// The steady-state predictor truncated to an L-lag history:
//   E[y_t | y_{t-1..t-L}] ~ sum_{l=1..L} coeffs[:, :, l-1] y_{t-l} + bias,
// slice l = C Gamma^{l-1} A K, bias = C (sum_{j=0..L-1} Gamma^j) (b - A K d) + d.
struct TruncatedPredictor {
  Tensor3 coeffs;         // N x N x L
  Eigen::VectorXd bias;   // N
  Eigen::MatrixXd noise;  // innovation covariance
};

[[nodiscard]] TruncatedPredictor truncated_kalman_coeffs(const SteadyState& ss,
                                                         const LdsParams& p, int lags);

// Single-state model whose factors reproduce truncated_kalman_coeffs exactly:
// rank n+2m in tucker mode, n+3m in cp mode, for n real eigenvalues and m
// complex pairs of the closed-loop matrix.
[[nodiscard]] SaltParams lds_to_salt(const LdsParams& p, int lags, FactorMode mode);

// Upper bound on the max-abs one-step prediction error introduced by cutting
// the history at L lags:
//   w_bound * max_n sum_d |P_nd| * lam^L / (1 - lam)
// with P = C E over the complex eigenbasis E of Gamma and lam its spectral
// radius. w_bound must dominate ||E^-1 (A K y_t + b - A K d)||_inf; use
// innovation_drive_bound to measure it on data.
[[nodiscard]] double truncation_error_bound(const SteadyState& ss, const LdsParams& p,
                                            int lags, double w_bound);

// Largest ||E^-1 (A K y_t + b - A K d)||_inf over the series, the data-driven
// w_bound for truncation_error_bound.
[[nodiscard]] double innovation_drive_bound(const SteadyState& ss, const LdsParams& p,
                                            const Eigen::MatrixXd& series);

struct KalmanEval {
  Eigen::MatrixXd predicted_mean;  // (T - skip) x N, frames skip..T-1
  double log_lik = 0.0;            // predictive log-likelihood of those frames
};

// Fixed-gain (steady-state) Kalman one-step predictions, initialized at the
// stationary latent mean; the first `skip` frames update the filter but are
// not scored.
[[nodiscard]] KalmanEval kalman_steady_predictions(const LdsParams& p,
                                                   const Eigen::MatrixXd& series,
                                                   Eigen::Index skip);

}  // namespace salt
