#include "salt/hmm.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "salt/errors.hpp"

namespace salt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf/NaN caught upstream)
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

void check_log_lik(const Eigen::MatrixXd& log_lik, int num_states) {
  if (log_lik.cols() != num_states)
    throw ShapeError("log-likelihood table has " + std::to_string(log_lik.cols()) +
                     " columns for " + std::to_string(num_states) + " states");
  if (log_lik.rows() == 0) throw DataError("log-likelihood table is empty");
  for (Eigen::Index t = 0; t < log_lik.rows(); ++t)
    for (Eigen::Index h = 0; h < log_lik.cols(); ++h) {
      const double v = log_lik(t, h);
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw DataError("log-likelihood table contains NaN or +inf");
    }
}

}  // namespace

void TransitionModel::validate() const {
  const int h = num_states();
  if (h == 0) throw DataError("transition model has no states");
  if (pi.rows() != h || pi.cols() != h)
    throw ShapeError("transition matrix shape does not match initial distribution");
  auto check_row = [](const Eigen::VectorXd& row, const char* what) {
    if (!row.allFinite() || row.minCoeff() < 0.0)
      throw DataError(std::string(what) + ": entries must be finite and nonnegative");
    if (std::abs(row.sum() - 1.0) > 1e-8)
      throw DataError(std::string(what) + ": probabilities must sum to 1");
  };
  check_row(init, "initial distribution");
  for (int r = 0; r < h; ++r) check_row(pi.row(r).transpose(), "transition row");
}

TransitionModel TransitionModel::uniform(int num_states) {
  TransitionModel m;
  m.init = Eigen::VectorXd::Constant(num_states, 1.0 / num_states);
  m.pi = Eigen::MatrixXd::Constant(num_states, num_states, 1.0 / num_states);
  return m;
}

HmmPosterior forward_backward(const Eigen::MatrixXd& log_lik, const TransitionModel& tm) {
  tm.validate();
  const int num_states = tm.num_states();
  const Eigen::Index t_len = log_lik.rows();
  check_log_lik(log_lik, num_states);

  const Eigen::VectorXd log_init = tm.init.array().log();
  const Eigen::MatrixXd log_trans = tm.pi.array().log();

  Eigen::MatrixXd log_alpha(t_len, num_states), log_beta(t_len, num_states);
  log_alpha.row(0) = (log_init + log_lik.row(0).transpose()).transpose();
  Eigen::VectorXd work(num_states);
  for (Eigen::Index t = 1; t < t_len; ++t)
    for (int h = 0; h < num_states; ++h) {
      work = log_alpha.row(t - 1).transpose() + log_trans.col(h);
      log_alpha(t, h) = log_sum_exp(work) + log_lik(t, h);
    }

  log_beta.row(t_len - 1).setZero();
  for (Eigen::Index t = t_len - 2; t >= 0; --t)
    for (int h = 0; h < num_states; ++h) {
      work = log_trans.row(h).transpose() + log_lik.row(t + 1).transpose() +
             log_beta.row(t + 1).transpose();
      log_beta(t, h) = log_sum_exp(work);
    }

  HmmPosterior post;
  post.log_marginal = log_sum_exp(log_alpha.row(t_len - 1).transpose());
  if (post.log_marginal == kNegInf)
    throw NumericalError("observation sequence has zero likelihood under every state path");

  post.omega.resize(t_len, num_states);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    work = log_alpha.row(t).transpose() + log_beta.row(t).transpose();
    const double norm = log_sum_exp(work);
    for (int h = 0; h < num_states; ++h) post.omega(t, h) = std::exp(work[h] - norm);
  }

  post.xi.reserve(static_cast<std::size_t>(t_len > 0 ? t_len - 1 : 0));
  for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
    Eigen::MatrixXd slice = Eigen::MatrixXd::Zero(num_states, num_states);
    for (int h = 0; h < num_states; ++h) {
      if (log_alpha(t, h) == kNegInf) continue;
      for (int k = 0; k < num_states; ++k) {
        const double v = log_alpha(t, h) + log_trans(h, k) + log_lik(t + 1, k) +
                         log_beta(t + 1, k) - post.log_marginal;
        if (v != kNegInf) slice(h, k) = std::exp(v);
      }
    }
    post.xi.push_back(std::move(slice));
  }
  return post;
}

std::vector<int> viterbi(const Eigen::MatrixXd& log_lik, const TransitionModel& tm) {
  tm.validate();
  const int num_states = tm.num_states();
  const Eigen::Index t_len = log_lik.rows();
  check_log_lik(log_lik, num_states);

  const Eigen::VectorXd log_init = tm.init.array().log();
  const Eigen::MatrixXd log_trans = tm.pi.array().log();

  Eigen::MatrixXd score(t_len, num_states);
  Eigen::MatrixXi back(t_len, num_states);
  score.row(0) = (log_init + log_lik.row(0).transpose()).transpose();
  for (Eigen::Index t = 1; t < t_len; ++t)
    for (int h = 0; h < num_states; ++h) {
      int best_prev = 0;
      double best = score(t - 1, 0) + log_trans(0, h);
      for (int k = 1; k < num_states; ++k) {
        const double cand = score(t - 1, k) + log_trans(k, h);
        if (cand > best) {  // strict: ties keep the lowest previous index
          best = cand;
          best_prev = k;
        }
      }
      score(t, h) = best + log_lik(t, h);
      back(t, h) = best_prev;
    }

  int state = 0;
  double best = score(t_len - 1, 0);
  for (int h = 1; h < num_states; ++h)
    if (score(t_len - 1, h) > best) {
      best = score(t_len - 1, h);
      state = h;
    }
  if (best == kNegInf) throw NumericalError("no state path has positive probability");

  std::vector<int> path(static_cast<std::size_t>(t_len));
  path.back() = state;
  for (Eigen::Index t = t_len - 1; t > 0; --t) {
    state = back(t, state);
    path[static_cast<std::size_t>(t - 1)] = state;
  }
  return path;
}

TransitionModel update_transitions(const std::vector<Eigen::MatrixXd>& xi,
                                   const Eigen::VectorXd& omega_0, const DirichletPrior& prior) {
  if (prior.alpha_diag < 1.0 || prior.alpha_offdiag < 1.0)
    throw DataError("Dirichlet concentrations must be >= 1 for a proper MAP update");
  const int num_states = static_cast<int>(omega_0.size());
  if (num_states == 0) throw DataError("empty state marginal");

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_states, num_states);
  for (const auto& slice : xi) {
    if (slice.rows() != num_states || slice.cols() != num_states)
      throw ShapeError("pairwise expectation slice does not match the state count");
    counts += slice;
  }

  TransitionModel out;
  out.init = omega_0;
  const double init_sum = out.init.sum();
  if (init_sum <= 0.0) throw NumericalError("first-frame marginal has no mass");
  out.init /= init_sum;

  out.pi.resize(num_states, num_states);
  for (int h = 0; h < num_states; ++h) {
    Eigen::VectorXd row(num_states);
    for (int k = 0; k < num_states; ++k) {
      const double alpha = (h == k) ? prior.alpha_diag : prior.alpha_offdiag;
      row[k] = counts(h, k) + alpha - 1.0;
    }
    const double total = row.sum();
    if (total <= 0.0)
      throw NumericalError("transition row " + std::to_string(h) +
                           " has no mass; use a prior with alpha_offdiag > 1");
    out.pi.row(h) = (row / total).transpose();
  }
  return out;
}

}  // namespace salt
