#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "init_detail.hpp"
#include "salt/errors.hpp"
#include "salt/model.hpp"
#include "salt/rng.hpp"
#include "salt/var.hpp"

namespace salt {

namespace detail {

std::vector<int> kmeans_labels(const Eigen::MatrixXd& series, int lags, int k,
                               std::uint64_t seed) {
  const Eigen::Index scored = series.rows() - lags;
  std::vector<int> labels(static_cast<std::size_t>(scored), 0);
  if (k == 1) return labels;

  Rng rng(seed ^ 0x6b6d65616e73ULL);
  const int n = static_cast<int>(series.cols());
  Eigen::MatrixXd centers(k, n);
  centers.row(0) = series.row(lags + static_cast<Eigen::Index>(rng.uniform_index(scored)));
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(scored, std::numeric_limits<double>::max());
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index r = 0; r < scored; ++r)
      d2[r] = std::min(d2[r], (series.row(lags + r) - centers.row(c - 1)).squaredNorm());
    const double total = d2.sum();
    Eigen::Index pick = scored - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total, run = 0.0;
      for (Eigen::Index r = 0; r < scored; ++r) {
        run += d2[r];
        if (run >= target) {
          pick = r;
          break;
        }
      }
    }
    centers.row(c) = series.row(lags + pick);
  }

  Eigen::VectorXd dist(k);
  for (int iter = 0; iter < 25; ++iter) {
    bool changed = false;
    for (Eigen::Index r = 0; r < scored; ++r) {
      for (int c = 0; c < k; ++c)
        dist[c] = (series.row(lags + r) - centers.row(c)).squaredNorm();
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (dist[c] < dist[best]) best = c;
      if (labels[static_cast<std::size_t>(r)] != best) {
        labels[static_cast<std::size_t>(r)] = best;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, n);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index r = 0; r < scored; ++r) {
      sums.row(labels[static_cast<std::size_t>(r)]) += series.row(lags + r);
      counts[labels[static_cast<std::size_t>(r)]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0.0) {
        centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Re-seed an empty cluster at the point farthest from its center.
      Eigen::Index far = 0;
      double best = -1.0;
      for (Eigen::Index r = 0; r < scored; ++r) {
        const double d =
            (series.row(lags + r) - centers.row(labels[static_cast<std::size_t>(r)]))
                .squaredNorm();
        if (d > best) {
          best = d;
          far = r;
        }
      }
      centers.row(c) = series.row(lags + far);
      changed = true;
    }
    if (!changed && iter > 0) break;
  }
  return labels;
}

TransitionModel chain_from_labels(const std::vector<int>& labels, int num_states) {
  TransitionModel tm;
  tm.init = Eigen::VectorXd::Constant(num_states, 1.0);
  tm.init[labels.empty() ? 0 : static_cast<std::size_t>(labels[0])] += num_states;
  tm.init /= tm.init.sum();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Ones(num_states, num_states);
  for (std::size_t r = 0; r + 1 < labels.size(); ++r)
    counts(labels[r], labels[r + 1]) += 1.0;
  tm.pi.resize(num_states, num_states);
  for (int h = 0; h < num_states; ++h) tm.pi.row(h) = counts.row(h) / counts.row(h).sum();
  return tm;
}

}  // namespace detail

namespace {

// Columns of the top eigenspace of m*m^T, largest eigenvalue first, each
// column's largest-magnitude entry made positive so the basis is reproducible.
Eigen::MatrixXd leading_subspace(const Eigen::MatrixXd& m, int count) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m * m.transpose());
  if (eig.info() != Eigen::Success) throw NumericalError("subspace eigensolve failed");
  const Eigen::Index cols = eig.eigenvectors().cols();
  Eigen::MatrixXd out(m.rows(), count);
  for (int j = 0; j < count; ++j) {
    Eigen::VectorXd v = eig.eigenvectors().col(cols - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    out.col(j) = v;
  }
  return out;
}

// Truncated orthogonal factorization of the full VAR tensor: subspaces from
// the three unfoldings, core by projection.
TuckerFactors truncate_var(const Eigen::MatrixXd& coef, int n, int lags, int rank,
                           int rank_lag, FactorMode mode) {
  Tensor3 full = mode_n_fold(coef, 1, n, n, lags);
  const Eigen::MatrixXd a1 = coef;
  const Eigen::MatrixXd a2 = mode_n_matricize(full, 2);
  const Eigen::MatrixXd a3 = mode_n_matricize(full, 3);

  TuckerFactors f;
  f.U = leading_subspace(a1, rank);
  f.V = leading_subspace(a2, rank);
  f.W = leading_subspace(a3, rank_lag);
  if (mode == FactorMode::tucker) {
    const Eigen::MatrixXd g1 = f.U.transpose() * a1 * kron(f.V, f.W);
    f.G = mode_n_fold(g1, 1, rank, rank, rank_lag);
  } else {
    f.G = superdiagonal_core(Eigen::VectorXd::Ones(rank));
  }
  return f;
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

}  // namespace

SaltParams init_salt_params(const Eigen::MatrixXd& y, const FitConfig& cfg) {
  cfg.validate();
  const int num_states = cfg.H, rank = cfg.D, lags = cfg.L;
  const FactorMode mode = cfg.mode;
  const int n = static_cast<int>(y.cols());
  const int rank_lag = cfg.rank_lag > 0 ? cfg.rank_lag : rank;
  if (rank > n)
    throw DataError("rank " + std::to_string(rank) + " exceeds observation dimension " +
                    std::to_string(n));
  if (rank_lag > lags) throw DataError("lag-mode rank exceeds the lag order");
  if (y.rows() <= lags) throw DataError("series too short for the requested lag order");
  if (!y.allFinite()) throw DataError("series contains non-finite values");
  const Eigen::Index scored = y.rows() - lags;

  SaltParams params;
  params.mode = mode;
  params.states.resize(num_states);

  if (cfg.init == InitMethod::random) {
    Rng rng(cfg.seed);
    const double factor_scale = 1.0 / std::sqrt(static_cast<double>(n) * rank);
    const double lag_scale = 1.0 / std::sqrt(static_cast<double>(lags) * rank_lag);
    const Eigen::VectorXd mean = y.bottomRows(scored).colwise().mean().transpose();
    Eigen::MatrixXd centered = y.bottomRows(scored);
    centered.rowwise() -= mean.transpose();
    Eigen::MatrixXd sample_cov = centered.transpose() * centered / static_cast<double>(scored);
    sample_cov.diagonal().array() += cfg.cov_floor;

    for (auto& s : params.states) {
      s.factors.U.resize(n, rank);
      s.factors.V.resize(n, rank);
      s.factors.W.resize(lags, rank_lag);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < rank; ++j) s.factors.U(i, j) = rng.normal(0.0, factor_scale);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < rank; ++j) s.factors.V(i, j) = rng.normal(0.0, factor_scale);
      for (int i = 0; i < lags; ++i)
        for (int j = 0; j < rank_lag; ++j) s.factors.W(i, j) = rng.normal(0.0, lag_scale);
      if (mode == FactorMode::cp) {
        s.factors.G = superdiagonal_core(Eigen::VectorXd::Ones(rank));
      } else {
        s.factors.G = Tensor3(rank, rank, rank_lag);
        for (auto& g : s.factors.G.data()) g = rng.normal();
      }
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
    return params;
  }

  // Cluster, fit a full VAR per cluster, then truncate to the target ranks.
  const std::vector<int> labels = detail::kmeans_labels(y, lags, num_states, cfg.seed);
  for (int h = 0; h < num_states; ++h) {
    Eigen::VectorXd weights(scored);
    for (Eigen::Index r = 0; r < scored; ++r)
      weights[r] = labels[static_cast<std::size_t>(r)] == h ? 1.0 : 0.0;
    WeightedLagStats stats(n, lags);
    stats.accumulate(y, weights);
    const OlsVar ols = ols_var(stats, std::max(cfg.ridge, 1e-6));
    auto& s = params.states[h];
    s.factors = truncate_var(ols.coef, n, lags, rank, rank_lag, mode);
    s.bias = ols.bias;
    const Eigen::MatrixXd trunc_coef = s.factors.U * mode_n_matricize(s.factors.G, 1) *
                                       kron(s.factors.V, s.factors.W).transpose();
    s.cov = residual_cov(stats, trunc_coef, s.bias, cfg.cov_floor);
  }
  params.tm = num_states == 1 ? TransitionModel::uniform(1)
                              : detail::chain_from_labels(labels, num_states);
  return params;
}

FitResult fit_em(const Eigen::MatrixXd& y, const FitConfig& cfg) {
  FitResult result;
  result.params = init_salt_params(y, cfg);
  SaltParams& params = result.params;
  FitTrace& trace = result.trace;
  const MStepOptions opts{cfg.ridge, cfg.cov_floor, cfg.min_state_weight};
  const int n = static_cast<int>(y.cols());
  const int num_states = cfg.H, lags = cfg.L;
  const FactorMode mode = cfg.mode;

  auto sweep_state = [&](SaltStateParams& s, const WeightedLagStats& stats) {
    for (int sweep = 0; sweep < cfg.inner_sweeps; ++sweep) {
      bool exact = true;
      exact &= update_output_factor(s, stats, opts);
      exact &= update_core_tensor(s, stats, mode, opts);
      exact &= update_input_factor(s, stats, opts);
      exact &= update_lag_factor(s, stats, opts);
      update_bias_cov(s, stats, opts);
      if (!exact) trace.ridge_used = true;
    }
  };

  auto plateaued = [&](double prev, double cur) {
    return cur - prev <= cfg.rel_tol * std::max(std::abs(prev), 1.0);
  };

  if (num_states == 1) {
    // Single state: the posterior is trivial and the lag statistics never
    // change, so EM reduces to repeated coordinate sweeps.
    WeightedLagStats stats(n, lags);
    stats.accumulate(y, Eigen::VectorXd());
    double log_lik = -expected_nll(params.states[0], stats);
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
      trace.log_marginal.push_back(log_lik);
      if (iter > 0 && plateaued(trace.log_marginal[iter - 1], log_lik)) {
        trace.converged = true;
        break;
      }
      try {
        sweep_state(params.states[0], stats);
      } catch (const NumericalError& err) {
        throw NumericalError("iteration " + std::to_string(iter) + ": " + err.what());
      }
      ++trace.iterations;
      log_lik = -expected_nll(params.states[0], stats);
    }
    if (!trace.converged) trace.log_marginal.push_back(log_lik);
    trace.posterior = trivial_posterior(y.rows() - lags, trace.log_marginal.back());
    return result;
  }

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
      params.tm = update_transitions(post.xi, post.omega.row(0).transpose(), cfg.prior);
      for (int h = 0; h < num_states; ++h) {
        WeightedLagStats stats(n, lags);
        stats.accumulate(y, post.omega.col(h));
        sweep_state(params.states[h], stats);
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
  return result;
}

}  // namespace salt
