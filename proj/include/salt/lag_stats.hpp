#pragma once

#include <Eigen/Dense>

namespace salt {

// Weighted second-moment statistics of a series and its lags. For scored
// frames t = lags..T-1 with weights w_t, stores
//
//   cov block (l, l')  = sum_t w_t y_{t-l} y_{t-l'}^T   l, l' in 0..lags
//   sum  block l       = sum_t w_t y_{t-l}
//   weight_sum         = sum_t w_t
//
// Lag 0 is the current frame (the regression target); lags 1..L form the
// autoregressive design. Every least-squares update in the M-step is a small
// contraction of these blocks, so one pass over the data serves a whole
// coordinate sweep. Frames before t = lags condition the regression but are
// never scored.
class WeightedLagStats {
 public:
  WeightedLagStats(int dim, int lags);

  // weights has one entry per scored frame (series.rows() - lags) or is empty
  // for uniform weight 1.
  void accumulate(const Eigen::MatrixXd& series, const Eigen::VectorXd& weights);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int lags() const { return lags_; }
  [[nodiscard]] double weight_sum() const { return weight_sum_; }

  [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> cov_block(int l, int lp) const {
    return cov_.block(l * dim_, lp * dim_, dim_, dim_);
  }
  // Design-only slices: u_t = [y_{t-1}; ...; y_{t-L}], length dim*lags.
  [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> design_cov() const {
    return cov_.block(dim_, dim_, dim_ * lags_, dim_ * lags_);
  }
  [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> target_design_cov() const {
    return cov_.block(0, dim_, dim_, dim_ * lags_);
  }
  [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> target_cov() const {
    return cov_.block(0, 0, dim_, dim_);
  }
  [[nodiscard]] Eigen::VectorBlock<const Eigen::VectorXd> design_sum() const {
    return sum_.segment(dim_, dim_ * lags_);
  }
  [[nodiscard]] Eigen::VectorBlock<const Eigen::VectorXd> target_sum() const {
    return sum_.segment(0, dim_);
  }

  [[nodiscard]] const Eigen::MatrixXd& full_cov() const { return cov_; }
  [[nodiscard]] const Eigen::VectorXd& full_sum() const { return sum_; }

 private:
  int dim_, lags_;
  double weight_sum_ = 0.0;
  Eigen::MatrixXd cov_;  // dim*(lags+1) square
  Eigen::VectorXd sum_;
};

}  // namespace salt
