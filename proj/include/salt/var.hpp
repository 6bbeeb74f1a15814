#pragma once

#include <Eigen/Dense>

#include "salt/lag_stats.hpp"

namespace salt {

struct OlsVar {
  Eigen::MatrixXd coef;  // N x N*L, lag l block at columns (l-1)*N .. l*N-1
  Eigen::VectorXd bias;
  bool exact = true;
};

// Least-squares vector autoregression with intercept, solved from the
// weighted lag statistics; falls back to a trace-scaled ridge when the
// normal equations are singular.
[[nodiscard]] OlsVar ols_var(const WeightedLagStats& stats, double ridge);

// Weighted residual covariance of the given VAR under the same statistics,
// floored on the diagonal so a Cholesky factorization always succeeds.
[[nodiscard]] Eigen::MatrixXd residual_cov(const WeightedLagStats& stats,
                                           const Eigen::MatrixXd& coef,
                                           const Eigen::VectorXd& bias, double cov_floor);

}  // namespace salt
