#include "salt/var.hpp"

#include <algorithm>

#include "salt/errors.hpp"

namespace salt {

OlsVar ols_var(const WeightedLagStats& stats, double ridge) {
  const int n = stats.dim(), lags = stats.lags();
  const int width = n * lags + 1;  // design plus the intercept column
  Eigen::MatrixXd gram(width, width);
  gram.topLeftCorner(n * lags, n * lags) = stats.design_cov();
  gram.topRightCorner(n * lags, 1) = stats.design_sum();
  gram.bottomLeftCorner(1, n * lags) = stats.design_sum().transpose();
  gram(width - 1, width - 1) = stats.weight_sum();
  Eigen::MatrixXd rhs(width, n);
  rhs.topRows(n * lags) = stats.target_design_cov().transpose();
  rhs.bottomRows(1) = stats.target_sum().transpose();

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  OlsVar out;
  if (llt.info() == Eigen::Success) {
    const Eigen::MatrixXd sol = llt.solve(rhs);
    out.coef = sol.topRows(n * lags).transpose();
    out.bias = sol.bottomRows(1).transpose();
    return out;
  }
  const double scale = gram.trace() / width;
  gram.diagonal().array() += ridge * (scale > 0.0 ? scale : 1.0);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericalError("VAR normal equations unsolvable");
  const Eigen::MatrixXd sol = ldlt.solve(rhs);
  out.coef = sol.topRows(n * lags).transpose();
  out.bias = sol.bottomRows(1).transpose();
  out.exact = false;
  return out;
}

Eigen::MatrixXd residual_cov(const WeightedLagStats& stats, const Eigen::MatrixXd& coef,
                             const Eigen::VectorXd& bias, double cov_floor) {
  const Eigen::MatrixXd cross = stats.target_design_cov() * coef.transpose();
  const Eigen::VectorXd rsum = stats.target_sum() - coef * stats.design_sum();
  Eigen::MatrixXd moment = stats.target_cov() - cross - cross.transpose() +
                           coef * stats.design_cov() * coef.transpose() -
                           rsum * bias.transpose() - bias * rsum.transpose() +
                           stats.weight_sum() * bias * bias.transpose();
  const double denom = std::max(stats.weight_sum(), 1.0);
  Eigen::MatrixXd cov = moment / denom;
  cov = 0.5 * (cov + cov.transpose()).eval();
  cov.diagonal().array() += cov_floor;
  return cov;
}

}  // namespace salt
