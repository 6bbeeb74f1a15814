#pragma once

#include <Eigen/Dense>
#include <vector>

namespace salt {

// Discrete-state chain: row-stochastic transition matrix and initial
// distribution, both stored as probabilities.
struct TransitionModel {
  Eigen::MatrixXd pi;    // H x H, row h -> next-state distribution
  Eigen::VectorXd init;  // H

  [[nodiscard]] int num_states() const { return static_cast<int>(init.size()); }
  void validate() const;  // throws DataError unless rows are distributions

  static TransitionModel uniform(int num_states);
};

// Dirichlet prior on each transition row; alpha = 1 everywhere is plain
// maximum likelihood. A large diagonal alpha makes states sticky.
struct DirichletPrior {
  double alpha_diag = 1.0;
  double alpha_offdiag = 1.0;
};

struct HmmPosterior {
  Eigen::MatrixXd omega;            // T x H, smoothed per-frame marginals
  std::vector<Eigen::MatrixXd> xi;  // T-1 entries, H x H pairwise expectations
  double log_marginal = 0.0;
};

// Exact smoothing for the given per-frame log-likelihood table (T x H).
// Computed in log space; tolerates -inf entries (impossible frame/state
// pairs) but throws DataError on NaN or +inf, and NumericalError if some
// frame has zero likelihood under every state.
[[nodiscard]] HmmPosterior forward_backward(const Eigen::MatrixXd& log_lik,
                                            const TransitionModel& tm);

// Most likely state path. Ties resolve to the lowest state index, both in the
// per-step maximization and the final argmax, so results are deterministic.
[[nodiscard]] std::vector<int> viterbi(const Eigen::MatrixXd& log_lik,
                                       const TransitionModel& tm);

// M-step for the chain: MAP row h proportional to sum_t xi[t](h, :) + alpha - 1
// (requires alpha >= 1). Throws NumericalError if a row ends up with no mass,
// which cannot happen for alpha_offdiag > 1. The initial distribution is the
// first-frame marginal under a uniform prior.
[[nodiscard]] TransitionModel update_transitions(
    const std::vector<Eigen::MatrixXd>& xi, const Eigen::VectorXd& omega_0,
    const DirichletPrior& prior);

}  // namespace salt
