#include "salt/arhmm.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "init_detail.hpp"
#include "salt/errors.hpp"
#include "salt/lag_stats.hpp"
#include "salt/rng.hpp"
#include "salt/var.hpp"

namespace salt {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

Eigen::LLT<Eigen::MatrixXd> cov_llt(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("state covariance is not positive definite");
  return llt;
}

double half_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

// The degenerate single-state posterior, so every fit reports one.
HmmPosterior trivial_posterior(Eigen::Index scored, double log_marginal) {
  HmmPosterior post;
  post.omega = Eigen::MatrixXd::Ones(scored, 1);
  post.xi.assign(static_cast<std::size_t>(scored > 0 ? scored - 1 : 0),
                 Eigen::MatrixXd::Ones(1, 1));
  post.log_marginal = log_marginal;
  return post;
}

void check_series(const ArhmmParams& p, const Eigen::MatrixXd& y) {
  if (y.cols() != p.dim()) throw DataError("series dimension does not match model");
  if (y.rows() <= p.lags()) throw DataError("series too short for the model's lag order");
  if (!y.allFinite()) throw DataError("series contains non-finite values");
}

}  // namespace

void ArhmmParams::validate() const {
  if (states.empty()) throw ShapeError("model has no states");
  tm.validate();
  if (tm.num_states() != num_states())
    throw ShapeError("transition model size does not match state count");
  const int n = dim(), l = lags();
  for (const auto& s : states) {
    if (s.coef.n1() != n || s.coef.n2() != n || s.coef.n3() != l)
      throw ShapeError("states disagree on dimensions or lag order");
    if (s.bias.size() != n || s.cov.rows() != n || s.cov.cols() != n)
      throw ShapeError("bias or covariance size does not match observation dimension");
    if (!s.coef.all_finite() || !s.bias.allFinite() || !s.cov.allFinite())
      throw DataError("state parameters contain non-finite values");
  }
}

Eigen::MatrixXd coef_matrix(const Tensor3& coef) {
  const int n1 = coef.n1(), n2 = coef.n2(), lags = coef.n3();
  Eigen::MatrixXd mat(n1, static_cast<Eigen::Index>(n2) * lags);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      for (int l = 0; l < lags; ++l) mat(i, static_cast<Eigen::Index>(l) * n2 + j) = coef(i, j, l);
  return mat;
}

Tensor3 coef_tensor(const Eigen::MatrixXd& mat, int dim, int lags) {
  if (mat.rows() != dim || mat.cols() != static_cast<Eigen::Index>(dim) * lags)
    throw ShapeError("coefficient matrix does not match the requested shape");
  Tensor3 coef(dim, dim, lags);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int l = 0; l < lags; ++l) coef(i, j, l) = mat(i, static_cast<Eigen::Index>(l) * dim + j);
  return coef;
}

Eigen::MatrixXd emission_log_likelihoods(const ArhmmParams& p, const Eigen::MatrixXd& y) {
  p.validate();
  check_series(p, y);
  const int n = p.dim(), lags = p.lags(), num_states = p.num_states();
  const Eigen::Index scored = y.rows() - lags;

  std::vector<Eigen::MatrixXd> coef(num_states);
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt;
  std::vector<double> log_norm(num_states);
  llt.reserve(num_states);
  for (int h = 0; h < num_states; ++h) {
    coef[h] = coef_matrix(p.states[h].coef);
    llt.push_back(cov_llt(p.states[h].cov));
    log_norm[h] = -0.5 * n * kLog2Pi - half_log_det(llt[h]);
  }

  Eigen::MatrixXd out(scored, num_states);
  constexpr Eigen::Index kChunk = 2048;
  Eigen::MatrixXd design(kChunk, static_cast<Eigen::Index>(n) * lags);
  for (Eigen::Index start = 0; start < scored; start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, scored - start);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index t = lags + start + r;
      for (int l = 1; l <= lags; ++l) design.block(r, (l - 1) * n, 1, n) = y.row(t - l);
    }
    const auto dc = design.topRows(rows);
    for (int h = 0; h < num_states; ++h) {
      Eigen::MatrixXd mean = dc * coef[h].transpose();
      mean.rowwise() += p.states[h].bias.transpose();
      Eigen::MatrixXd resid = (y.middleRows(lags + start, rows) - mean).transpose();
      const Eigen::MatrixXd white = llt[h].matrixL().solve(resid);
      out.col(h).segment(start, rows) =
          (-0.5 * white.colwise().squaredNorm().array() + log_norm[h]).transpose();
    }
  }
  return out;
}

std::vector<int> most_likely_states(const ArhmmParams& p, const Eigen::MatrixXd& y) {
  return viterbi(emission_log_likelihoods(p, y), p.tm);
}

Eigen::MatrixXd predictive_means(const ArhmmParams& p, const Eigen::MatrixXd& y,
                                 const Eigen::MatrixXd& weights) {
  p.validate();
  check_series(p, y);
  const int n = p.dim(), lags = p.lags(), num_states = p.num_states();
  const Eigen::Index scored = y.rows() - lags;
  if (weights.rows() != scored || weights.cols() != num_states)
    throw ShapeError("weights do not match the series and state count");

  std::vector<Eigen::MatrixXd> coef(num_states);
  for (int h = 0; h < num_states; ++h) coef[h] = coef_matrix(p.states[h].coef);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(scored, n);
  Eigen::VectorXd u(static_cast<Eigen::Index>(n) * lags);
  for (Eigen::Index r = 0; r < scored; ++r) {
    const Eigen::Index t = lags + r;
    for (int l = 1; l <= lags; ++l) u.segment((l - 1) * n, n) = y.row(t - l).transpose();
    for (int h = 0; h < num_states; ++h) {
      const double w = weights(r, h);
      if (w == 0.0) continue;
      out.row(r) += w * (coef[h] * u + p.states[h].bias).transpose();
    }
  }
  return out;
}

ArhmmFitResult fit_arhmm(const Eigen::MatrixXd& y, const FitConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(y.cols());
  const int num_states = cfg.H, lags = cfg.L;
  if (n == 0) throw DataError("series has no columns");
  if (y.rows() <= lags + 1) throw DataError("series too short for the requested lag order");
  if (!y.allFinite()) throw DataError("series contains non-finite values");
  const Eigen::Index scored = y.rows() - lags;

  ArhmmFitResult result;
  ArhmmParams& params = result.params;
  FitTrace& trace = result.trace;
  params.states.resize(num_states);

  if (cfg.init == InitMethod::random) {
    Rng rng(cfg.seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n) * lags);
    const Eigen::VectorXd mean = y.bottomRows(scored).colwise().mean().transpose();
    Eigen::MatrixXd centered = y.bottomRows(scored);
    centered.rowwise() -= mean.transpose();
    Eigen::MatrixXd sample_cov = centered.transpose() * centered / static_cast<double>(scored);
    sample_cov.diagonal().array() += cfg.cov_floor;
    for (auto& s : params.states) {
      s.coef = Tensor3(n, n, lags);
      for (auto& g : s.coef.data()) g = rng.normal(0.0, scale);
      s.bias = mean;
      s.cov = sample_cov;
    }
    if (num_states == 1) {
      params.tm = TransitionModel::uniform(1);
    } else {
      params.tm.init = Eigen::VectorXd::Constant(num_states, 1.0 / num_states);
      params.tm.pi = Eigen::MatrixXd::Constant(num_states, num_states, 0.1 / num_states);
      params.tm.pi.diagonal().array() += 0.9;
      for (int h = 0; h < num_states; ++h) params.tm.pi.row(h) /= params.tm.pi.row(h).sum();
    }
  } else {
    const std::vector<int> labels = detail::kmeans_labels(y, lags, num_states, cfg.seed);
    for (int h = 0; h < num_states; ++h) {
      Eigen::VectorXd weights(scored);
      for (Eigen::Index r = 0; r < scored; ++r)
        weights[r] = labels[static_cast<std::size_t>(r)] == h ? 1.0 : 0.0;
      WeightedLagStats stats(n, lags);
      stats.accumulate(y, weights);
      const OlsVar ols = ols_var(stats, std::max(cfg.ridge, 1e-6));
      auto& s = params.states[h];
      s.coef = coef_tensor(ols.coef, n, lags);
      s.bias = ols.bias;
      s.cov = residual_cov(stats, ols.coef, s.bias, cfg.cov_floor);
    }
    params.tm = num_states == 1 ? TransitionModel::uniform(1)
                                : detail::chain_from_labels(labels, num_states);
  }

  auto plateaued = [&](double prev, double cur) {
    return cur - prev <= cfg.rel_tol * std::max(std::abs(prev), 1.0);
  };

  Eigen::MatrixXd log_lik_table = emission_log_likelihoods(params, y);
  bool have_final_post = false;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    try {
      HmmPosterior post = forward_backward(log_lik_table, params.tm);
      trace.log_marginal.push_back(post.log_marginal);
      if (iter > 0 && plateaued(trace.log_marginal[iter - 1], post.log_marginal)) {
        trace.converged = true;
        trace.posterior = std::move(post);
        have_final_post = true;
        break;
      }
      if (num_states > 1)
        params.tm = update_transitions(post.xi, post.omega.row(0).transpose(), cfg.prior);
      for (int h = 0; h < num_states; ++h) {
        WeightedLagStats stats(n, lags);
        stats.accumulate(y, post.omega.col(h));
        if (stats.weight_sum() < cfg.min_state_weight) continue;  // starved state, freeze
        const OlsVar ols = ols_var(stats, cfg.ridge);
        if (!ols.exact) trace.ridge_used = true;
        auto& s = params.states[h];
        s.coef = coef_tensor(ols.coef, n, lags);
        s.bias = ols.bias;
        s.cov = residual_cov(stats, ols.coef, s.bias, cfg.cov_floor);
      }
      ++trace.iterations;
      log_lik_table = emission_log_likelihoods(params, y);
    } catch (const NumericalError& err) {
      throw NumericalError("iteration " + std::to_string(iter) + ": " + err.what());
    }
  }
  if (!have_final_post) {
    trace.posterior = forward_backward(log_lik_table, params.tm);
    trace.log_marginal.push_back(trace.posterior.log_marginal);
  }
  if (num_states == 1) trace.posterior = trivial_posterior(scored, trace.posterior.log_marginal);
  return result;
}

std::int64_t param_count(ModelKind kind, int num_states, int dim, int lags, int rank) {
  if (num_states < 1 || dim < 1 || lags < 1)
    throw DataError("parameter counts need positive dimensions");
  if (kind != ModelKind::arhmm && rank < 1)
    throw DataError("parameter counts need a positive rank");
  const auto h = static_cast<std::int64_t>(num_states);
  const auto n = static_cast<std::int64_t>(dim);
  const auto l = static_cast<std::int64_t>(lags);
  const auto d = static_cast<std::int64_t>(rank);
  switch (kind) {
    case ModelKind::arhmm:
      return h * n * n * l;
    case ModelKind::cp:
      return h * (2 * n * d + l * d + d);
    case ModelKind::tucker:
      return h * (2 * n * d + l * d + d * d * d);
    case ModelKind::slds:
      return h * d * d + n * d;
  }
  throw DataError("unknown model kind");
}

}  // namespace salt
