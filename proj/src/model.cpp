#include "salt/model.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "salt/errors.hpp"

namespace salt {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

// Psi maps the stacked lag window u_t = [y_{t-1}; ...; y_{t-L}] to
// vec_rm(V^T X_t W): row (l-1)*N + q, column c*D3 + d holds V(q,c)*W(l-1,d).
Eigen::MatrixXd build_psi(const Eigen::MatrixXd& v, const Eigen::MatrixXd& w) {
  const int n = static_cast<int>(v.rows()), d2 = static_cast<int>(v.cols());
  const int lags = static_cast<int>(w.rows()), d3 = static_cast<int>(w.cols());
  Eigen::MatrixXd psi(n * lags, d2 * d3);
  for (int l = 0; l < lags; ++l)
    for (int q = 0; q < n; ++q)
      for (int c = 0; c < d2; ++c)
        for (int d = 0; d < d3; ++d) psi(l * n + q, c * d3 + d) = v(q, c) * w(l, d);
  return psi;
}

// Phi maps u_t to the latent regressor x_t = G(1) vec_rm(V^T X_t W), so the
// state's mean is U * Phi^T u_t + b.
Eigen::MatrixXd build_phi(const TuckerFactors& f) {
  return build_psi(f.V, f.W) * mode_n_matricize(f.G, 1).transpose();
}

// CP path only touches the superdiagonal coordinates of the core.
Eigen::MatrixXd build_psi_diag(const Eigen::MatrixXd& v, const Eigen::MatrixXd& w) {
  const int n = static_cast<int>(v.rows()), rank = static_cast<int>(v.cols());
  const int lags = static_cast<int>(w.rows());
  Eigen::MatrixXd psi(n * lags, rank);
  for (int l = 0; l < lags; ++l)
    for (int q = 0; q < n; ++q)
      for (int d = 0; d < rank; ++d) psi(l * n + q, d) = v(q, d) * w(l, d);
  return psi;
}

struct RidgeSolve {
  Eigen::MatrixXd solution;
  bool exact = true;
};

// Solves gram * x = rhs for PSD gram; falls back to a trace-scaled ridge when
// the Cholesky factorization reports indefiniteness.
RidgeSolve solve_normal_equations(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs,
                                  double ridge) {
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success) return {llt.solve(rhs), true};
  const double scale = gram.trace() / static_cast<double>(gram.rows());
  const double lambda = ridge * (scale > 0.0 ? scale : 1.0);
  Eigen::MatrixXd damped = gram;
  damped.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("normal equations unsolvable even with ridge");
  return {ldlt.solve(rhs), false};
}

Eigen::LLT<Eigen::MatrixXd> cov_llt(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("state covariance is not positive definite");
  return llt;
}

double half_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

// Centered residual second moment sum_t w (r_t - b)(r_t - b)^T with
// r_t = y_t - U Phi^T u_t, assembled from the lag statistics.
Eigen::MatrixXd centered_residual_moment(const SaltStateParams& state,
                                         const WeightedLagStats& stats,
                                         const Eigen::MatrixXd& phi, Eigen::VectorXd* resid_sum) {
  const Eigen::MatrixXd coef = state.factors.U * phi.transpose();  // N x N*L
  const Eigen::MatrixXd cross = stats.target_design_cov() * coef.transpose();  // N x N
  Eigen::MatrixXd moment = stats.target_cov() - cross - cross.transpose() +
                           coef * stats.design_cov() * coef.transpose();
  Eigen::VectorXd rsum = stats.target_sum() - coef * stats.design_sum();
  moment += -rsum * state.bias.transpose() - state.bias * rsum.transpose() +
            stats.weight_sum() * state.bias * state.bias.transpose();
  if (resid_sum) *resid_sum = rsum;
  return moment;
}

// Shared driver for the posterior-weighted all-state updates: builds each
// state's weighted lag statistics once and hands them to the per-state update.
template <typename Update>
bool for_each_state(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                    Update&& update) {
  p.validate();
  const Eigen::Index scored = y.rows() - p.lags();
  if (post.omega.rows() != scored || post.omega.cols() != p.num_states())
    throw ShapeError("posterior marginals do not match the series and state count");
  bool exact = true;
  for (int h = 0; h < p.num_states(); ++h) {
    WeightedLagStats stats(static_cast<int>(y.cols()), p.lags());
    stats.accumulate(y, post.omega.col(h));
    exact = update(p.states[h], stats) && exact;
  }
  return exact;
}

}  // namespace

void SaltParams::validate() const {
  if (states.empty()) throw ShapeError("model has no states");
  tm.validate();
  if (tm.num_states() != num_states())
    throw ShapeError("transition model size does not match state count");
  const auto& first = states[0].factors;
  for (const auto& s : states) {
    s.factors.validate();
    if (s.factors.n1() != first.n1() || s.factors.n2() != first.n2() ||
        s.factors.n3() != first.n3() || s.factors.d1() != first.d1() ||
        s.factors.d2() != first.d2() || s.factors.d3() != first.d3())
      throw ShapeError("states disagree on dimensions or ranks");
    if (s.factors.n1() != s.factors.n2())
      throw ShapeError("coefficient tensor must map the observation space to itself");
    if (s.bias.size() != s.factors.n1() || s.cov.rows() != s.factors.n1() ||
        s.cov.cols() != s.factors.n1())
      throw ShapeError("bias or covariance size does not match observation dimension");
    if (!s.bias.allFinite() || !s.cov.allFinite())
      throw DataError("bias or covariance contains non-finite values");
    if (mode == FactorMode::cp && !is_superdiagonal(s.factors.G))
      throw DataError("cp-mode core must be superdiagonal");
  }
}

void FitConfig::validate() const {
  if (H < 1 || D < 1 || L < 1) throw DataError("H, D, and L must be positive");
  if (max_iters < 1) throw DataError("max_iters must be at least 1");
  if (rel_tol < 0.0) throw DataError("rel_tol must be nonnegative");
  if (inner_sweeps < 1) throw DataError("inner_sweeps must be at least 1");
  if (rank_lag < 0) throw DataError("rank_lag must be nonnegative");
  if (mode == FactorMode::cp && rank_lag > 0 && rank_lag != D)
    throw DataError("cp mode ties the lag rank to D; leave rank_lag at 0");
}

Eigen::MatrixXd lag_window(const Eigen::MatrixXd& series, Eigen::Index t, int lags) {
  if (t < lags || t >= series.rows()) throw ShapeError("lag_window: frame out of range");
  Eigen::MatrixXd x(series.cols(), lags);
  for (int l = 1; l <= lags; ++l) x.col(l - 1) = series.row(t - l).transpose();
  return x;
}

Eigen::MatrixXd emission_log_likelihoods(const SaltParams& p, const Eigen::MatrixXd& y) {
  p.validate();
  const int n = p.dim(), lags = p.lags(), num_states = p.num_states();
  if (y.cols() != n) throw DataError("series dimension does not match model");
  if (y.rows() <= lags) throw DataError("series too short for the model's lag order");
  if (!y.allFinite()) throw DataError("series contains non-finite values");
  const Eigen::Index scored = y.rows() - lags;

  std::vector<Eigen::MatrixXd> phi(num_states);
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt;
  std::vector<double> log_norm(num_states);
  llt.reserve(num_states);
  for (int h = 0; h < num_states; ++h) {
    phi[h] = build_phi(p.states[h].factors);
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
      const auto& st = p.states[h];
      Eigen::MatrixXd mean = (dc * phi[h]) * st.factors.U.transpose();
      mean.rowwise() += st.bias.transpose();
      Eigen::MatrixXd resid = (y.middleRows(lags + start, rows) - mean).transpose();  // N x rows
      const Eigen::MatrixXd white = llt[h].matrixL().solve(resid);
      out.col(h).segment(start, rows) =
          (-0.5 * white.colwise().squaredNorm().array() + log_norm[h]).transpose();
    }
  }
  return out;
}

HmmPosterior e_step(const SaltParams& p, const Eigen::MatrixXd& y) {
  return forward_backward(emission_log_likelihoods(p, y), p.tm);
}

bool update_output_factor(SaltStateParams& state, const WeightedLagStats& stats,
                          const MStepOptions& opts) {
  if (stats.weight_sum() < opts.min_state_weight) return true;
  const Eigen::MatrixXd phi = build_phi(state.factors);
  const Eigen::MatrixXd cxx = phi.transpose() * stats.design_cov() * phi;
  if (cxx.trace() <= 0.0) return false;  // regressor identically zero, keep U
  const Eigen::VectorXd cx = phi.transpose() * stats.design_sum();
  const Eigen::MatrixXd cyx = stats.target_design_cov() * phi - state.bias * cx.transpose();
  auto solved = solve_normal_equations(cxx, cyx.transpose(), opts.ridge);
  state.factors.U = solved.solution.transpose();
  return solved.exact;
}

bool update_core_tensor(SaltStateParams& state, const WeightedLagStats& stats, FactorMode mode,
                        const MStepOptions& opts) {
  if (stats.weight_sum() < opts.min_state_weight) return true;
  const auto& f = state.factors;
  const Eigen::LLT<Eigen::MatrixXd> sig = cov_llt(state.cov);
  const Eigen::MatrixXd sig_inv_u = sig.solve(f.U);
  const Eigen::MatrixXd a = f.U.transpose() * sig_inv_u;  // D1 x D1
  const Eigen::MatrixXd centered_cross =
      stats.target_design_cov() - state.bias * stats.design_sum().transpose();  // N x N*L

  if (mode == FactorMode::cp) {
    const Eigen::MatrixXd psi = build_psi_diag(f.V, f.W);
    const Eigen::MatrixXd m2 = psi.transpose() * stats.design_cov() * psi;
    const Eigen::MatrixXd gram = a.cwiseProduct(m2);
    const Eigen::VectorXd rhs = (sig_inv_u.transpose() * (centered_cross * psi)).diagonal();
    auto solved = solve_normal_equations(gram, rhs, opts.ridge);
    state.factors.G = superdiagonal_core(solved.solution.col(0));
    return solved.exact;
  }

  const Eigen::MatrixXd psi = build_psi(f.V, f.W);
  const Eigen::MatrixXd m2 = psi.transpose() * stats.design_cov() * psi;
  const Eigen::MatrixXd b = sig_inv_u.transpose() * (centered_cross * psi);  // D1 x D2*D3
  Eigen::LLT<Eigen::MatrixXd> llt_a(a), llt_m2(m2);
  if (llt_a.info() == Eigen::Success && llt_m2.info() == Eigen::Success) {
    // A G(1) M2 = B solved one side at a time.
    const Eigen::MatrixXd g1 = llt_m2.solve(llt_a.solve(b).transpose()).transpose();
    state.factors.G = mode_n_fold(g1, 1, f.d1(), f.d2(), f.d3());
    return true;
  }
  const Eigen::MatrixXd gram = kron(a, m2);  // vec_rm(A G1 M2) = kron(A, M2) vec_rm(G1)
  auto solved = solve_normal_equations(gram, vec_rm(b), opts.ridge);
  state.factors.G = mode_n_fold(unvec_rm(solved.solution.col(0), f.d1(), f.d2() * f.d3()), 1,
                                f.d1(), f.d2(), f.d3());
  return solved.exact;
}

bool update_input_factor(SaltStateParams& state, const WeightedLagStats& stats,
                         const MStepOptions& opts) {
  if (stats.weight_sum() < opts.min_state_weight) return true;
  const auto& f = state.factors;
  const int n = f.n2(), lags = f.n3(), d1 = f.d1(), d2 = f.d2(), d3 = f.d3();
  const Eigen::LLT<Eigen::MatrixXd> sig = cov_llt(state.cov);
  const Eigen::MatrixXd sig_inv_u = sig.solve(f.U);
  const Eigen::MatrixXd a = f.U.transpose() * sig_inv_u;
  const Eigen::MatrixXd g1 = mode_n_matricize(f.G, 1);
  const Eigen::MatrixXd t4 = g1.transpose() * a * g1;  // (D2*D3) sq, index c*D3+d

  // E2[d][d'] = sum_{l,l'} W(l,d) W(l',d') cov_block(l,l'), via one-sided pass.
  std::vector<std::vector<Eigen::MatrixXd>> half(d3);
  for (int d = 0; d < d3; ++d) {
    half[d].assign(lags, Eigen::MatrixXd::Zero(n, n));
    for (int lp = 1; lp <= lags; ++lp)
      for (int l = 1; l <= lags; ++l) half[d][lp - 1] += f.W(l - 1, d) * stats.cov_block(l, lp);
  }
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d2 * n, d2 * n);
  Eigen::MatrixXd e2(n, n);
  for (int d = 0; d < d3; ++d)
    for (int dp = 0; dp < d3; ++dp) {
      e2.setZero();
      for (int lp = 1; lp <= lags; ++lp) e2 += f.W(lp - 1, dp) * half[d][lp - 1];
      for (int c = 0; c < d2; ++c)
        for (int cp = 0; cp < d2; ++cp)
          gram.block(c * n, cp * n, n, n) += t4(c * d3 + d, cp * d3 + dp) * e2;
    }

  Eigen::MatrixXd rhs_mat = Eigen::MatrixXd::Zero(n, d2);  // (q, c)
  Eigen::MatrixXd slice(d1, d2);
  for (int d = 0; d < d3; ++d) {
    Eigen::MatrixXd f2 = Eigen::MatrixXd::Zero(n, d1);
    for (int l = 1; l <= lags; ++l) {
      const Eigen::MatrixXd cross =
          (stats.cov_block(l, 0) - stats.full_sum().segment(l * n, n) * state.bias.transpose()) *
          sig_inv_u;
      f2 += f.W(l - 1, d) * cross;
    }
    for (int i = 0; i < d1; ++i)
      for (int c = 0; c < d2; ++c) slice(i, c) = f.G(i, c, d);
    rhs_mat += f2 * slice;
  }
  Eigen::VectorXd rhs(d2 * n);
  for (int c = 0; c < d2; ++c)
    for (int q = 0; q < n; ++q) rhs[c * n + q] = rhs_mat(q, c);

  auto solved = solve_normal_equations(gram, rhs, opts.ridge);
  for (int c = 0; c < d2; ++c)
    for (int q = 0; q < n; ++q) state.factors.V(q, c) = solved.solution(c * n + q, 0);
  return solved.exact;
}

bool update_lag_factor(SaltStateParams& state, const WeightedLagStats& stats,
                       const MStepOptions& opts) {
  if (stats.weight_sum() < opts.min_state_weight) return true;
  const auto& f = state.factors;
  const int n = f.n2(), lags = f.n3(), d1 = f.d1(), d2 = f.d2(), d3 = f.d3();
  const Eigen::LLT<Eigen::MatrixXd> sig = cov_llt(state.cov);
  const Eigen::MatrixXd sig_inv_u = sig.solve(f.U);
  const Eigen::MatrixXd a = f.U.transpose() * sig_inv_u;
  const Eigen::MatrixXd g1 = mode_n_matricize(f.G, 1);
  const Eigen::MatrixXd t4 = g1.transpose() * a * g1;

  // T4 regrouped per (d, d') pair: td(c, c') = t4(c*D3+d, c'*D3+d').
  std::vector<Eigen::MatrixXd> t_pair(static_cast<std::size_t>(d3) * d3,
                                      Eigen::MatrixXd(d2, d2));
  for (int d = 0; d < d3; ++d)
    for (int dp = 0; dp < d3; ++dp) {
      auto& td = t_pair[static_cast<std::size_t>(d) * d3 + dp];
      for (int c = 0; c < d2; ++c)
        for (int cp = 0; cp < d2; ++cp) td(c, cp) = t4(c * d3 + d, cp * d3 + dp);
    }

  Eigen::MatrixXd gram(lags * d3, lags * d3);
  for (int l = 1; l <= lags; ++l)
    for (int lp = 1; lp <= lags; ++lp) {
      const Eigen::MatrixXd vc = f.V.transpose() * stats.cov_block(l, lp) * f.V;
      for (int d = 0; d < d3; ++d)
        for (int dp = 0; dp < d3; ++dp)
          gram((l - 1) * d3 + d, (lp - 1) * d3 + dp) =
              t_pair[static_cast<std::size_t>(d) * d3 + dp].cwiseProduct(vc).sum();
    }

  Eigen::VectorXd rhs(lags * d3);
  Eigen::MatrixXd slice(d1, d2);
  std::vector<Eigen::MatrixXd> slices(d3);
  for (int d = 0; d < d3; ++d) {
    for (int i = 0; i < d1; ++i)
      for (int c = 0; c < d2; ++c) slice(i, c) = f.G(i, c, d);
    slices[d] = slice;
  }
  for (int l = 1; l <= lags; ++l) {
    const Eigen::MatrixXd h_l =
        f.V.transpose() *
        ((stats.cov_block(l, 0) - stats.full_sum().segment(l * n, n) * state.bias.transpose()) *
         sig_inv_u);  // D2 x D1
    for (int d = 0; d < d3; ++d) rhs[(l - 1) * d3 + d] = (slices[d] * h_l).trace();
  }

  auto solved = solve_normal_equations(gram, rhs, opts.ridge);
  for (int l = 0; l < lags; ++l)
    for (int d = 0; d < d3; ++d) state.factors.W(l, d) = solved.solution(l * d3 + d, 0);
  return solved.exact;
}

void update_bias_cov(SaltStateParams& state, const WeightedLagStats& stats,
                     const MStepOptions& opts) {
  if (stats.weight_sum() < opts.min_state_weight) return;
  const Eigen::MatrixXd phi = build_phi(state.factors);
  const Eigen::MatrixXd coef = state.factors.U * phi.transpose();
  const Eigen::VectorXd resid_sum = stats.target_sum() - coef * stats.design_sum();
  state.bias = resid_sum / stats.weight_sum();

  Eigen::VectorXd dummy;
  Eigen::MatrixXd moment = centered_residual_moment(state, stats, phi, &dummy);
  Eigen::MatrixXd cov = moment / stats.weight_sum();
  cov = 0.5 * (cov + cov.transpose()).eval();
  cov.diagonal().array() += opts.cov_floor;
  state.cov = cov;
}

bool m_step_output(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                   const MStepOptions& opts) {
  return for_each_state(p, y, post, [&opts](SaltStateParams& s, const WeightedLagStats& st) {
    return update_output_factor(s, st, opts);
  });
}

bool m_step_core(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                 const MStepOptions& opts) {
  const FactorMode mode = p.mode;
  return for_each_state(p, y, post,
                        [&opts, mode](SaltStateParams& s, const WeightedLagStats& st) {
                          return update_core_tensor(s, st, mode, opts);
                        });
}

bool m_step_input(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                  const MStepOptions& opts) {
  return for_each_state(p, y, post, [&opts](SaltStateParams& s, const WeightedLagStats& st) {
    return update_input_factor(s, st, opts);
  });
}

bool m_step_lag(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                const MStepOptions& opts) {
  return for_each_state(p, y, post, [&opts](SaltStateParams& s, const WeightedLagStats& st) {
    return update_lag_factor(s, st, opts);
  });
}

void m_step_bias_cov(SaltParams& p, const Eigen::MatrixXd& y, const HmmPosterior& post,
                     const MStepOptions& opts) {
  for_each_state(p, y, post, [&opts](SaltStateParams& s, const WeightedLagStats& st) {
    update_bias_cov(s, st, opts);
    return true;
  });
}

double expected_nll(const SaltStateParams& state, const WeightedLagStats& stats) {
  const int n = static_cast<int>(state.bias.size());
  const Eigen::MatrixXd phi = build_phi(state.factors);
  const Eigen::MatrixXd moment = centered_residual_moment(state, stats, phi, nullptr);
  const Eigen::LLT<Eigen::MatrixXd> sig = cov_llt(state.cov);
  const double quad = sig.solve(moment).trace();
  return 0.5 * (stats.weight_sum() * (n * kLog2Pi + 2.0 * half_log_det(sig)) + quad);
}

Eigen::MatrixXd latent_trajectory(const SaltParams& p, const Eigen::MatrixXd& y,
                                  const std::vector<int>& path) {
  p.validate();
  const int n = p.dim(), lags = p.lags();
  if (y.cols() != n) throw DataError("series dimension does not match model");
  if (y.rows() <= lags) throw DataError("series too short for the model's lag order");
  const Eigen::Index scored = y.rows() - lags;
  if (static_cast<Eigen::Index>(path.size()) != scored)
    throw ShapeError("state path length does not match the scored frame count");

  std::vector<Eigen::MatrixXd> phi(p.num_states());
  for (int h = 0; h < p.num_states(); ++h) phi[h] = build_phi(p.states[h].factors);

  Eigen::MatrixXd out(scored, p.rank());
  Eigen::VectorXd u(static_cast<Eigen::Index>(n) * lags);
  for (Eigen::Index r = 0; r < scored; ++r) {
    const int h = path[static_cast<std::size_t>(r)];
    if (h < 0 || h >= p.num_states()) throw ShapeError("state path entry out of range");
    const Eigen::Index t = lags + r;
    for (int l = 1; l <= lags; ++l) u.segment((l - 1) * n, n) = y.row(t - l).transpose();
    out.row(r) = (phi[h].transpose() * u).transpose();
  }
  return out;
}

std::vector<int> most_likely_states(const SaltParams& p, const Eigen::MatrixXd& y) {
  return viterbi(emission_log_likelihoods(p, y), p.tm);
}

Eigen::VectorXd ar_filter(const SaltParams& p, int h, int out_index, int in_index) {
  if (h < 0 || h >= p.num_states()) throw ShapeError("state index out of range");
  if (out_index < 0 || out_index >= p.dim() || in_index < 0 || in_index >= p.dim())
    throw ShapeError("series index out of range");
  const auto& f = p.states[h].factors;
  // m[k] = sum_{ij} g_ijk U(p,i) V(q,j); filter = W m.
  Eigen::VectorXd m = Eigen::VectorXd::Zero(f.d3());
  for (int i = 0; i < f.d1(); ++i)
    for (int j = 0; j < f.d2(); ++j) {
      const double uv = f.U(out_index, i) * f.V(in_index, j);
      if (uv == 0.0) continue;
      for (int k = 0; k < f.d3(); ++k) m[k] += uv * f.G(i, j, k);
    }
  return f.W * m;
}

Eigen::MatrixXd predictive_means(const SaltParams& p, const Eigen::MatrixXd& y,
                                 const Eigen::MatrixXd& weights) {
  p.validate();
  const int n = p.dim(), lags = p.lags(), num_states = p.num_states();
  if (y.cols() != n) throw DataError("series dimension does not match model");
  if (y.rows() <= lags) throw DataError("series too short for the model's lag order");
  const Eigen::Index scored = y.rows() - lags;
  if (weights.rows() != scored || weights.cols() != num_states)
    throw ShapeError("weight matrix does not match the series and state count");

  std::vector<Eigen::MatrixXd> phi(num_states);
  for (int h = 0; h < num_states; ++h) phi[h] = build_phi(p.states[h].factors);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(scored, n);
  Eigen::VectorXd u(static_cast<Eigen::Index>(n) * lags);
  for (Eigen::Index r = 0; r < scored; ++r) {
    const Eigen::Index t = lags + r;
    for (int l = 1; l <= lags; ++l) u.segment((l - 1) * n, n) = y.row(t - l).transpose();
    for (int h = 0; h < num_states; ++h) {
      const double w = weights(r, h);
      if (w == 0.0) continue;
      out.row(r) +=
          w * (p.states[h].factors.U * (phi[h].transpose() * u) + p.states[h].bias).transpose();
    }
  }
  return out;
}

FilterResult filtered_predictions(const SaltParams& p, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd log_lik = emission_log_likelihoods(p, y);
  const Eigen::Index scored = log_lik.rows();
  const int num_states = p.num_states(), n = p.dim(), lags = p.lags();

  // Per-state one-step means for every scored frame.
  std::vector<Eigen::MatrixXd> phi(num_states);
  for (int h = 0; h < num_states; ++h) phi[h] = build_phi(p.states[h].factors);

  FilterResult out;
  out.predicted_mean.resize(scored, n);
  out.state_predictive.resize(scored, num_states);
  Eigen::VectorXd pred = p.tm.init;
  double total = 0.0;
  Eigen::VectorXd u(static_cast<Eigen::Index>(n) * lags);
  for (Eigen::Index r = 0; r < scored; ++r) {
    const Eigen::Index t = lags + r;
    for (int l = 1; l <= lags; ++l) u.segment((l - 1) * n, n) = y.row(t - l).transpose();
    out.state_predictive.row(r) = pred.transpose();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (int h = 0; h < num_states; ++h)
      if (pred[h] > 0.0)
        mean += pred[h] * (p.states[h].factors.U * (phi[h].transpose() * u) + p.states[h].bias);
    out.predicted_mean.row(r) = mean.transpose();

    // Predictive log-likelihood of the frame, then the filtering update.
    const double shift = log_lik.row(r).maxCoeff();
    Eigen::VectorXd scaled = (log_lik.row(r).transpose().array() - shift).exp();
    const double mix = pred.dot(scaled);
    if (!(mix > 0.0) || !std::isfinite(shift))
      throw NumericalError("filter update has zero predictive likelihood at frame " +
                           std::to_string(t));
    total += std::log(mix) + shift;
    Eigen::VectorXd filt = pred.cwiseProduct(scaled) / mix;
    pred = p.tm.pi.transpose() * filt;
  }
  out.log_marginal = total;
  return out;
}

}  // namespace salt
