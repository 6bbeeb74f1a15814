#include "salt/lag_stats.hpp"

#include <cmath>
#include <string>

#include "salt/errors.hpp"

namespace salt {

WeightedLagStats::WeightedLagStats(int dim, int lags) : dim_(dim), lags_(lags) {
  if (dim <= 0 || lags <= 0) throw ShapeError("WeightedLagStats: dim and lags must be positive");
  const int width = dim * (lags + 1);
  cov_ = Eigen::MatrixXd::Zero(width, width);
  sum_ = Eigen::VectorXd::Zero(width);
}

void WeightedLagStats::accumulate(const Eigen::MatrixXd& series, const Eigen::VectorXd& weights) {
  const Eigen::Index t_len = series.rows();
  if (series.cols() != dim_) throw ShapeError("lag stats: series dimension mismatch");
  if (t_len <= lags_)
    throw DataError("lag stats: series of length " + std::to_string(t_len) +
                    " too short for " + std::to_string(lags_) + " lags");
  const Eigen::Index scored = t_len - lags_;
  const bool uniform = weights.size() == 0;
  if (!uniform && weights.size() != scored)
    throw ShapeError("lag stats: one weight per scored frame expected");

  const int width = dim_ * (lags_ + 1);
  constexpr Eigen::Index kChunk = 2048;
  Eigen::MatrixXd z(kChunk, width);
  Eigen::VectorXd root_w(kChunk);

  for (Eigen::Index start = 0; start < scored; start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, scored - start);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index t = lags_ + start + r;
      const double w = uniform ? 1.0 : weights[start + r];
      if (w < 0.0 || !std::isfinite(w)) throw DataError("lag stats: invalid weight");
      weight_sum_ += w;
      const double rw = std::sqrt(w);
      root_w[r] = rw;
      for (int l = 0; l <= lags_; ++l)
        z.block(r, l * dim_, 1, dim_) = rw * series.row(t - l);
    }
    auto zc = z.topRows(rows);
    cov_.selfadjointView<Eigen::Lower>().rankUpdate(zc.transpose(), 1.0);
    sum_.noalias() += zc.transpose() * root_w.head(rows);
  }
  cov_.triangularView<Eigen::Upper>() = cov_.transpose();
}

}  // namespace salt
