#include "salt/lds.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "salt/errors.hpp"
#include "salt/rng.hpp"

namespace salt {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd chol_or_throw(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(what) + " is not positive definite");
  return llt.matrixL();
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> eig(m, false);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::VectorXd stationary_mean(const LdsParams& p) {
  const int dim = p.latent_dim();
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim) - p.A;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) return Eigen::VectorXd::Zero(dim);
  return lu.solve(p.b);
}

}  // namespace

Eigen::MatrixXd stationary_latent_cov(const LdsParams& p) {
  if (spectral_radius(p.A) >= 1.0) return p.Q;
  Eigen::MatrixXd s = p.Q;
  for (int iter = 0; iter < 100000; ++iter) {
    Eigen::MatrixXd next = p.A * s * p.A.transpose() + p.Q;
    next = 0.5 * (next + next.transpose()).eval();
    const double delta = (next - s).cwiseAbs().maxCoeff();
    s = next;
    if (delta < 1e-12) break;
  }
  return s;
}

void LdsParams::validate() const {
  const int dim = latent_dim(), n = obs_dim();
  if (dim == 0 || n == 0) throw ShapeError("LDS has empty dimensions");
  if (A.cols() != dim || C.cols() != dim || Q.rows() != dim || Q.cols() != dim ||
      R.rows() != n || R.cols() != n || b.size() != dim || d.size() != n)
    throw ShapeError("LDS parameter shapes are inconsistent");
  if (!A.allFinite() || !C.allFinite() || !Q.allFinite() || !R.allFinite() ||
      !b.allFinite() || !d.allFinite())
    throw DataError("LDS parameters contain non-finite values");
}

Eigen::MatrixXd simulate_lds(const LdsParams& p, Eigen::Index steps, std::uint64_t seed) {
  p.validate();
  if (steps <= 0) throw DataError("simulate_lds: steps must be positive");
  const int dim = p.latent_dim(), n = p.obs_dim();
  const Eigen::MatrixXd lq = chol_or_throw(p.Q, "state noise");
  const Eigen::MatrixXd lr = chol_or_throw(p.R, "observation noise");
  Eigen::LLT<Eigen::MatrixXd> init_llt(stationary_latent_cov(p));
  const Eigen::MatrixXd l0 =
      init_llt.info() == Eigen::Success ? Eigen::MatrixXd(init_llt.matrixL()) : lq;

  Rng rng(seed);
  auto draw = [&rng](Eigen::Index k) {
    Eigen::VectorXd v(k);
    for (Eigen::Index i = 0; i < k; ++i) v[i] = rng.normal();
    return v;
  };

  Eigen::MatrixXd obs(steps, n);
  Eigen::VectorXd x = l0 * draw(dim);
  for (Eigen::Index t = 0; t < steps; ++t) {
    obs.row(t) = (p.C * x + p.d + lr * draw(n)).transpose();
    x = p.A * x + p.b + lq * draw(dim);
  }
  return obs;
}

SteadyState solve_dare(const LdsParams& p, double tol, int max_iters) {
  p.validate();
  if (spectral_radius(p.A) >= 1.0)
    throw NumericalError("steady-state filter requires a stable dynamics matrix");
  const int dim = p.latent_dim();

  Eigen::MatrixXd sigma = p.Q;
  double delta = std::numeric_limits<double>::max();
  for (int iter = 1; iter <= max_iters; ++iter) {
    const Eigen::MatrixXd innov = p.C * sigma * p.C.transpose() + p.R;
    Eigen::LLT<Eigen::MatrixXd> llt(innov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("innovation covariance lost positive definiteness");
    // K = Sigma C^T innov^-1, via innov K^T = C Sigma.
    const Eigen::MatrixXd gain = llt.solve(p.C * sigma).transpose();
    Eigen::MatrixXd next = p.A * (sigma - gain * p.C * sigma) * p.A.transpose() + p.Q;
    next = 0.5 * (next + next.transpose()).eval();
    delta = (next - sigma).cwiseAbs().maxCoeff();
    sigma = next;
    if (delta < tol) {
      SteadyState out;
      out.Sigma_pred = sigma;
      out.innovation_cov = p.C * sigma * p.C.transpose() + p.R;
      Eigen::LLT<Eigen::MatrixXd> llt2(out.innovation_cov);
      out.K = llt2.solve(p.C * sigma).transpose();
      out.Gamma = p.A * (Eigen::MatrixXd::Identity(dim, dim) - out.K * p.C);
      out.lambda_max = spectral_radius(out.Gamma);
      out.iterations = iter;
      return out;
    }
  }
  throw NumericalError("Riccati iteration did not converge in " + std::to_string(max_iters) +
                       " steps; last residual " + std::to_string(delta));
}

ModalForm real_modal_form(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ShapeError("real_modal_form: matrix must be square and non-empty");
  const int dim = static_cast<int>(m.rows());
  Eigen::EigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXcd vals = eig.eigenvalues();
  const Eigen::MatrixXcd vecs = eig.eigenvectors();

  const double imag_tol = 1e-9;
  std::vector<int> real_idx;
  std::vector<int> pair_idx;  // representative with positive imaginary part
  std::vector<bool> used(dim, false);
  for (int i = 0; i < dim; ++i) {
    if (used[i]) continue;
    if (std::abs(vals[i].imag()) <= imag_tol * (1.0 + std::abs(vals[i]))) {
      real_idx.push_back(i);
      used[i] = true;
      continue;
    }
    // Find the unused conjugate partner.
    int partner = -1;
    double best = std::numeric_limits<double>::max();
    for (int j = 0; j < dim; ++j) {
      if (used[j] || j == i) continue;
      const double dist = std::abs(vals[j] - std::conj(vals[i]));
      if (dist < best) {
        best = dist;
        partner = j;
      }
    }
    if (partner < 0 || best > 1e-6 * (1.0 + std::abs(vals[i])))
      throw NumericalError("complex eigenvalue without conjugate partner");
    used[i] = used[partner] = true;
    pair_idx.push_back(vals[i].imag() > 0.0 ? i : partner);
  }

  std::sort(real_idx.begin(), real_idx.end(),
            [&](int a, int b) { return vals[a].real() > vals[b].real(); });
  std::sort(pair_idx.begin(), pair_idx.end(), [&](int a, int b) {
    const double ma = std::abs(vals[a]), mb = std::abs(vals[b]);
    if (ma != mb) return ma > mb;
    return vals[a].imag() < vals[b].imag();
  });

  ModalForm out;
  out.n_real = static_cast<int>(real_idx.size());
  out.n_complex_pairs = static_cast<int>(pair_idx.size());
  out.E.resize(dim, dim);
  out.Lambda = Eigen::MatrixXd::Zero(dim, dim);
  out.real_eigs.resize(out.n_real);
  out.pair_real.resize(out.n_complex_pairs);
  out.pair_imag.resize(out.n_complex_pairs);

  auto fix_phase = [](Eigen::VectorXcd v) {
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    const std::complex<double> pivot = v[arg];
    if (std::abs(pivot) > 0.0) v *= std::conj(pivot) / std::abs(pivot);
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    return v;
  };

  int col = 0;
  for (int k = 0; k < out.n_real; ++k, ++col) {
    const int i = real_idx[static_cast<std::size_t>(k)];
    const Eigen::VectorXcd v = fix_phase(vecs.col(i));
    out.E.col(col) = v.real();
    out.Lambda(col, col) = vals[i].real();
    out.real_eigs[k] = vals[i].real();
  }
  for (int k = 0; k < out.n_complex_pairs; ++k, col += 2) {
    const int i = pair_idx[static_cast<std::size_t>(k)];
    const Eigen::VectorXcd v = fix_phase(vecs.col(i));
    const double s = vals[i].real(), w = vals[i].imag();
    out.E.col(col) = v.real();
    out.E.col(col + 1) = v.imag();
    out.Lambda(col, col) = s;
    out.Lambda(col, col + 1) = w;
    out.Lambda(col + 1, col) = -w;
    out.Lambda(col + 1, col + 1) = s;
    out.pair_real[k] = s;
    out.pair_imag[k] = w;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(out.E);
  if (!lu.isInvertible())
    throw NumericalError("eigenvector matrix is singular; matrix is defective");
  out.E_inv = lu.inverse();

  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  const double residual = (out.E * out.Lambda * out.E_inv - m).cwiseAbs().maxCoeff();
  if (residual > 1e-6 * scale)
    throw NumericalError("modal reconstruction residual " + std::to_string(residual) +
                         " betrays a defective matrix");
  return out;
}

TruncatedPredictor truncated_kalman_coeffs(const SteadyState& ss, const LdsParams& p,
                                           int lags) {
  if (lags < 1) throw DataError("lag order must be positive");
  const int n = p.obs_dim(), dim = p.latent_dim();
  const Eigen::MatrixXd ak = p.A * ss.K;

  TruncatedPredictor out;
  out.coeffs = Tensor3(n, n, lags);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(dim, dim);  // Gamma^{l-1}
  Eigen::MatrixXd power_sum = Eigen::MatrixXd::Zero(dim, dim);  // sum_{j<l} Gamma^j
  for (int l = 1; l <= lags; ++l) {
    const Eigen::MatrixXd slice = p.C * power * ak;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.coeffs(i, j, l - 1) = slice(i, j);
    power_sum += power;
    power = power * ss.Gamma;
  }
  out.bias = p.C * power_sum * (p.b - ak * p.d) + p.d;
  out.noise = ss.innovation_cov;
  return out;
}

SaltParams lds_to_salt(const LdsParams& p, int lags, FactorMode mode) {
  if (lags < 1) throw DataError("lag order must be positive");
  const SteadyState ss = solve_dare(p);
  const ModalForm modal = real_modal_form(ss.Gamma);
  const int n_real = modal.n_real, n_pairs = modal.n_complex_pairs;
  const Eigen::MatrixXd ak = p.A * ss.K;

  SaltParams out;
  out.mode = mode;
  out.tm = TransitionModel::uniform(1);
  out.states.resize(1);
  SaltStateParams& state = out.states[0];

  if (mode == FactorMode::tucker) {
    const int rank = n_real + 2 * n_pairs;
    state.factors.U = p.C * modal.E;
    state.factors.V = (modal.E_inv * ak).transpose();
    state.factors.W.resize(lags, rank);
    for (int k = 0; k < n_real; ++k) {
      double power = 1.0;
      for (int l = 0; l < lags; ++l, power *= modal.real_eigs[k])
        state.factors.W(l, k) = power;
    }
    for (int k = 0; k < n_pairs; ++k) {
      const int col = n_real + 2 * k;
      std::complex<double> lam(modal.pair_real[k], modal.pair_imag[k]), cur(1.0, 0.0);
      for (int l = 0; l < lags; ++l, cur *= lam) {
        state.factors.W(l, col) = cur.real();
        state.factors.W(l, col + 1) = -cur.imag();
      }
    }
    // Core: identity on real modes; each pair contributes the +-1 pattern that
    // rebuilds its rotation block from the (Re, -Im) columns of W.
    state.factors.G = Tensor3(rank, rank, rank);
    for (int k = 0; k < n_real; ++k) state.factors.G(k, k, k) = 1.0;
    for (int k = 0; k < n_pairs; ++k) {
      const int a = n_real + 2 * k, c = a + 1;
      state.factors.G(a, a, a) = 1.0;
      state.factors.G(a, c, c) = -1.0;
      state.factors.G(c, a, c) = 1.0;
      state.factors.G(c, c, a) = 1.0;
    }
  } else {
    const int rank = n_real + 3 * n_pairs;
    Eigen::MatrixXd j(p.latent_dim(), rank);
    Eigen::MatrixXd s(rank, p.latent_dim());
    for (int k = 0; k < n_real; ++k) {
      j.col(k) = modal.E.col(k);
      s.row(k) = modal.E_inv.row(k);
    }
    for (int k = 0; k < n_pairs; ++k) {
      const int src = n_real + 2 * k, dst = n_real + 3 * k;
      const auto re_col = modal.E.col(src);
      const auto im_col = modal.E.col(src + 1);
      const auto e_row = modal.E_inv.row(src);
      const auto f_row = modal.E_inv.row(src + 1);
      j.col(dst) = re_col + im_col;
      j.col(dst + 1) = re_col;
      j.col(dst + 2) = im_col;
      s.row(dst) = e_row + f_row;
      s.row(dst + 1) = f_row;
      s.row(dst + 2) = e_row;
    }
    state.factors.U = p.C * j;
    state.factors.V = (s * ak).transpose();
    state.factors.W.resize(lags, rank);
    for (int k = 0; k < n_real; ++k) {
      double power = 1.0;
      for (int l = 0; l < lags; ++l, power *= modal.real_eigs[k])
        state.factors.W(l, k) = power;
    }
    for (int k = 0; k < n_pairs; ++k) {
      const int col = n_real + 3 * k;
      std::complex<double> lam(modal.pair_real[k], modal.pair_imag[k]), cur(1.0, 0.0);
      for (int l = 0; l < lags; ++l, cur *= lam) {
        state.factors.W(l, col) = cur.real();
        state.factors.W(l, col + 1) = cur.imag() - cur.real();
        state.factors.W(l, col + 2) = -cur.imag() - cur.real();
      }
    }
    state.factors.G = superdiagonal_core(Eigen::VectorXd::Ones(rank));
  }

  const TruncatedPredictor ref = truncated_kalman_coeffs(ss, p, lags);
  state.bias = ref.bias;
  state.cov = ref.noise;
  out.validate();
  return out;
}

double truncation_error_bound(const SteadyState& ss, const LdsParams& p, int lags,
                              double w_bound) {
  if (lags < 1) throw DataError("lag order must be positive");
  if (ss.lambda_max >= 1.0)
    throw NumericalError("closed-loop matrix is not stable; no finite bound");
  Eigen::EigenSolver<Eigen::MatrixXd> eig(ss.Gamma);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::MatrixXcd proj = p.C * eig.eigenvectors();
  const double row_sum = proj.cwiseAbs().rowwise().sum().maxCoeff();
  return w_bound * row_sum * std::pow(ss.lambda_max, lags) / (1.0 - ss.lambda_max);
}

double innovation_drive_bound(const SteadyState& ss, const LdsParams& p,
                              const Eigen::MatrixXd& series) {
  if (series.cols() != p.obs_dim())
    throw ShapeError("series dimension does not match the LDS");
  Eigen::EigenSolver<Eigen::MatrixXd> eig(ss.Gamma);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(eig.eigenvectors());
  if (!lu.isInvertible()) throw NumericalError("closed-loop eigenbasis is singular");
  const Eigen::MatrixXcd basis_inv = lu.inverse();

  const Eigen::MatrixXd ak = p.A * ss.K;
  const Eigen::VectorXd shift = p.b - ak * p.d;
  double biggest = 0.0;
  for (Eigen::Index t = 0; t < series.rows(); ++t) {
    const Eigen::VectorXcd q =
        basis_inv * (ak * series.row(t).transpose() + shift).cast<std::complex<double>>();
    biggest = std::max(biggest, q.cwiseAbs().maxCoeff());
  }
  return biggest;
}

KalmanEval kalman_steady_predictions(const LdsParams& p, const Eigen::MatrixXd& series,
                                     Eigen::Index skip) {
  p.validate();
  if (series.cols() != p.obs_dim())
    throw ShapeError("series dimension does not match the LDS");
  if (skip < 0 || skip >= series.rows()) throw DataError("skip must lie inside the series");
  const SteadyState ss = solve_dare(p);
  const int n = p.obs_dim();
  const Eigen::MatrixXd ak = p.A * ss.K;
  Eigen::LLT<Eigen::MatrixXd> innov(ss.innovation_cov);
  if (innov.info() != Eigen::Success)
    throw NumericalError("innovation covariance is not positive definite");
  const double log_norm =
      -0.5 * n * kLog2Pi - Eigen::MatrixXd(innov.matrixL()).diagonal().array().log().sum();

  KalmanEval out;
  out.predicted_mean.resize(series.rows() - skip, n);
  Eigen::VectorXd mu = stationary_mean(p);
  double total = 0.0;
  for (Eigen::Index t = 0; t < series.rows(); ++t) {
    const Eigen::VectorXd mean = p.C * mu + p.d;
    const Eigen::VectorXd resid = series.row(t).transpose() - mean;
    if (t >= skip) {
      out.predicted_mean.row(t - skip) = mean.transpose();
      total += log_norm - 0.5 * innov.matrixL().solve(resid).squaredNorm();
    }
    mu = p.A * mu + p.b + ak * resid;
  }
  out.log_lik = total;
  return out;
}

}  // namespace salt
