#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "salt/model.hpp"
#include "salt/tensor.hpp"

namespace salt {

// One discrete state's unconstrained autoregressive emission: dense
// coefficient tensor, bias, and noise covariance.
struct ArhmmStateParams {
  Tensor3 coef;          // N x N x L; coef(i, j, l) weights y_{t-1-l}[j] in output i
  Eigen::VectorXd bias;  // N
  Eigen::MatrixXd cov;   // N x N, SPD
};

// Full-tensor switching autoregression: the same generative model as
// SaltParams but with every per-state coefficient tensor stored densely.
struct ArhmmParams {
  TransitionModel tm;
  std::vector<ArhmmStateParams> states;

  [[nodiscard]] int num_states() const { return static_cast<int>(states.size()); }
  [[nodiscard]] int dim() const { return states.empty() ? 0 : states[0].coef.n1(); }
  [[nodiscard]] int lags() const { return states.empty() ? 0 : states[0].coef.n3(); }

  void validate() const;
};

struct ArhmmFitResult {
  ArhmmParams params;
  FitTrace trace;
};

// The dense coefficient tensor as the lag-stacked regression matrix: column
// (l-1)*N + j of the result weights y_{t-l}[j], matching the lag statistics'
// design ordering. coef_tensor inverts it.
[[nodiscard]] Eigen::MatrixXd coef_matrix(const Tensor3& coef);
[[nodiscard]] Tensor3 coef_tensor(const Eigen::MatrixXd& mat, int dim, int lags);

// Per-frame, per-state Gaussian log-likelihoods for scored frames t = L..T-1,
// laid out exactly like the factored model's emission table.
[[nodiscard]] Eigen::MatrixXd emission_log_likelihoods(const ArhmmParams& p,
                                                       const Eigen::MatrixXd& y);

// Most likely state path over the scored frames (Viterbi on the emissions).
[[nodiscard]] std::vector<int> most_likely_states(const ArhmmParams& p,
                                                  const Eigen::MatrixXd& y);

// One-step-ahead predictive means with the discrete state mixed out under the
// given per-frame weights ((T-L) x H; e.g. smoothed marginals).
[[nodiscard]] Eigen::MatrixXd predictive_means(const ArhmmParams& p, const Eigen::MatrixXd& y,
                                               const Eigen::MatrixXd& weights);

// Exact EM for the full-tensor model. Shares the E-step with the factored
// fit; the M-step solves each state's weighted least squares in closed form,
// so cfg.D, cfg.mode, cfg.rank_lag, and cfg.inner_sweeps are ignored.
[[nodiscard]] ArhmmFitResult fit_arhmm(const Eigen::MatrixXd& y, const FitConfig& cfg);

enum class ModelKind { arhmm, cp, tucker, slds };

// Learnable-parameter counts for the dynamics, excluding biases and
// covariances: H*N^2*L dense tensor entries; H*(2ND + LD + D) for factored
// states with a superdiagonal core and H*(2ND + LD + D^3) with a full core;
// H*D^2 + N*D for a switching LDS (H dynamics matrices plus the shared
// emission map). rank is ignored for the dense model.
[[nodiscard]] std::int64_t param_count(ModelKind kind, int num_states, int dim, int lags,
                                       int rank);

}  // namespace salt
