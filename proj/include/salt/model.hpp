#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "salt/hmm.hpp"
#include "salt/lag_stats.hpp"
#include "salt/tensor.hpp"

namespace salt {

enum class FactorMode { tucker, cp };

// One discrete state's autoregressive emission: low-rank coefficient tensor,
// bias, and noise covariance.
struct SaltStateParams {
  TuckerFactors factors;
  Eigen::VectorXd bias;  // N
  Eigen::MatrixXd cov;   // N x N, SPD
};

// Switching autoregressive model with factored per-state coefficient tensors.
// y_t ~ N( A^(z_t) contracted with [y_{t-1} ... y_{t-L}] + b^(z_t), Cov^(z_t) ).
struct SaltParams {
  FactorMode mode = FactorMode::tucker;
  TransitionModel tm;
  std::vector<SaltStateParams> states;

  [[nodiscard]] int num_states() const { return static_cast<int>(states.size()); }
  [[nodiscard]] int dim() const { return states.empty() ? 0 : states[0].factors.n1(); }
  [[nodiscard]] int lags() const { return states.empty() ? 0 : states[0].factors.n3(); }
  [[nodiscard]] int rank() const { return states.empty() ? 0 : states[0].factors.d1(); }
  [[nodiscard]] int rank_lag() const { return states.empty() ? 0 : states[0].factors.d3(); }

  void validate() const;
};

enum class InitMethod { kmeans, random };

struct FitConfig {
  int H = 1;  // discrete states
  int D = 1;  // factor rank
  int L = 1;  // autoregressive lags
  FactorMode mode = FactorMode::tucker;
  int max_iters = 100;
  double rel_tol = 1e-8;  // stop when relative log-marginal gain drops below this
  std::uint64_t seed = 0;
  InitMethod init = InitMethod::kmeans;
  DirichletPrior prior;   // alpha = 1 (maximum likelihood) unless set sticky
  int inner_sweeps = 1;   // coordinate sweeps per M-step
  int rank_lag = 0;       // lag-mode rank override; 0 keeps it equal to D
  double cov_floor = 1e-6;         // added to noise covariance diagonals
  double ridge = 1e-8;             // relative Tikhonov scale for singular solves
  double min_state_weight = 1e-8;  // below this expected count a state is frozen

  void validate() const;
};

struct FitTrace {
  // Log marginal likelihood at the start of each iteration, i.e. evaluated on
  // the parameters entering that iteration's M-step. EM guarantees this is
  // non-decreasing. The last entry corresponds to the returned parameters.
  std::vector<double> log_marginal;
  HmmPosterior posterior;  // smoothed posterior under the returned parameters
  int iterations = 0;
  bool converged = false;
  bool ridge_used = false;  // some normal-equations solve needed regularization
};

struct FitResult {
  SaltParams params;
  FitTrace trace;
};

// The lag window feeding the prediction of frame t: column j holds y_{t-1-j},
// so contraction with the coefficient tensor pairs lag l with tensor slice l.
[[nodiscard]] Eigen::MatrixXd lag_window(const Eigen::MatrixXd& series, Eigen::Index t,
                                         int lags);

// Per-frame, per-state Gaussian log-likelihoods for scored frames t = L..T-1.
// Row r corresponds to frame r + L; the first L frames condition, not score.
[[nodiscard]] Eigen::MatrixXd emission_log_likelihoods(const SaltParams& p,
                                                       const Eigen::MatrixXd& y);

// Smoothed posterior over the scored frames.
[[nodiscard]] HmmPosterior e_step(const SaltParams& p, const Eigen::MatrixXd& y);

struct MStepOptions {
  double ridge = 1e-8;
  double cov_floor = 1e-6;
  double min_state_weight = 1e-8;
};

// Single-state coordinate updates against precomputed lag statistics. Each
// solves its weighted least-squares problem exactly with the other factors
// held fixed; each returns false when the normal equations needed a ridge
// fallback. fit_em uses these so the data are visited once per state per
// iteration regardless of how many factors get updated.
bool update_output_factor(SaltStateParams& state, const WeightedLagStats& stats,
                          const MStepOptions& opts);
bool update_core_tensor(SaltStateParams& state, const WeightedLagStats& stats,
                        FactorMode mode, const MStepOptions& opts);
bool update_input_factor(SaltStateParams& state, const WeightedLagStats& stats,
                         const MStepOptions& opts);
bool update_lag_factor(SaltStateParams& state, const WeightedLagStats& stats,
                       const MStepOptions& opts);
void update_bias_cov(SaltStateParams& state, const WeightedLagStats& stats,
                     const MStepOptions& opts);

// Posterior-weighted coordinate updates for every state at once. Each builds
// the per-state weighted lag statistics from the smoothed marginals and then
// applies the matching single-state update; states whose total weight falls
// below min_state_weight keep their previous values. Returns false if any
// state's solve needed the ridge fallback.
bool m_step_output(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                   const MStepOptions& opts = {});
bool m_step_core(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                 const MStepOptions& opts = {});
bool m_step_input(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                  const MStepOptions& opts = {});
bool m_step_lag(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                const MStepOptions& opts = {});
void m_step_bias_cov(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                     const MStepOptions& opts = {});

// Expected negative log-likelihood contribution of one state under its stats;
// used for fast single-state traces and for update-order diagnostics.
[[nodiscard]] double expected_nll(const SaltStateParams& state, const WeightedLagStats& stats);

// Exact EM: e_step, transition update, then per state one coordinate sweep
// (U, G, V, W, bias/cov, repeated inner_sweeps times) per iteration.
[[nodiscard]] FitResult fit_em(const Eigen::MatrixXd& y, const FitConfig& cfg);

// Continuous low-dimensional representation along a given state path:
// row t is x_t = G(1) vec(V' X_t W) under the factors of state path[t], so
// U^(path[t]) x_t + b^(path[t]) reproduces the predictive mean.
[[nodiscard]] Eigen::MatrixXd latent_trajectory(const SaltParams& p, const Eigen::MatrixXd& y,
                                                const std::vector<int>& path);

// Most likely state path over the scored frames (Viterbi on the emissions).
[[nodiscard]] std::vector<int> most_likely_states(const SaltParams& p,
                                                  const Eigen::MatrixXd& y);

// The one-dimensional autoregressive filter from series q to series p in
// state h: filter[l] = A^(h)[p, q, l] of the materialized tensor, computed
// through the factors.
[[nodiscard]] Eigen::VectorXd ar_filter(const SaltParams& p, int h, int out_index,
                                        int in_index);

// One-step-ahead predictive means with the discrete state mixed out under the
// given per-frame weights ((T-L) x H; e.g. smoothed marginals from e_step).
[[nodiscard]] Eigen::MatrixXd predictive_means(const SaltParams& p, const Eigen::MatrixXd& y,
                                               const Eigen::MatrixXd& weights);

struct FilterResult {
  Eigen::MatrixXd predicted_mean;    // (T-L) x N, one-step-ahead forecasts
  Eigen::MatrixXd state_predictive;  // (T-L) x H, p(z_t | y_{1:t-1})
  double log_marginal = 0.0;         // joint predictive log-likelihood of scored frames
};

// Causal filter: one-step-ahead observation forecasts with the discrete state
// marginalized under its predictive distribution given past observations.
[[nodiscard]] FilterResult filtered_predictions(const SaltParams& p, const Eigen::MatrixXd& y);

// Fresh parameters for fitting; exposed for tests and custom drivers.
[[nodiscard]] SaltParams init_salt_params(const Eigen::MatrixXd& y, const FitConfig& cfg);

}  // namespace salt
