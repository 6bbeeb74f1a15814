#include "salt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salt/errors.hpp"

namespace salt {

Tensor3::Tensor3(int n1, int n2, int n3) : n1_(n1), n2_(n2), n3_(n3) {
  if (n1 < 0 || n2 < 0 || n3 < 0) throw ShapeError("Tensor3: negative dimension");
  data_.assign(static_cast<std::size_t>(n1) * n2 * n3, 0.0);
}

void Tensor3::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool Tensor3::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Eigen::VectorXd vec_rm(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return v;
}

Eigen::MatrixXd unvec_rm(const Eigen::VectorXd& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols)
    throw ShapeError("unvec_rm: size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = v[static_cast<Eigen::Index>(i) * cols + j];
  return m;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::MatrixXd mode_n_matricize(const Tensor3& t, int mode) {
  const int n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
  Eigen::MatrixXd m;
  switch (mode) {
    case 1:
      m.resize(n1, static_cast<Eigen::Index>(n2) * n3);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) m(i, j * n3 + k) = t(i, j, k);
      break;
    case 2:
      m.resize(n2, static_cast<Eigen::Index>(n1) * n3);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) m(j, i * n3 + k) = t(i, j, k);
      break;
    case 3:
      m.resize(n3, static_cast<Eigen::Index>(n1) * n2);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) m(k, i * n2 + j) = t(i, j, k);
      break;
    default:
      throw ShapeError("mode_n_matricize: mode must be 1, 2, or 3");
  }
  return m;
}

Tensor3 mode_n_fold(const Eigen::MatrixXd& m, int mode, int n1, int n2, int n3) {
  Tensor3 t(n1, n2, n3);
  auto check = [&](Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() != rows || m.cols() != cols)
      throw ShapeError("mode_n_fold: matrix shape does not match target tensor");
  };
  switch (mode) {
    case 1:
      check(n1, static_cast<Eigen::Index>(n2) * n3);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) t(i, j, k) = m(i, j * n3 + k);
      break;
    case 2:
      check(n2, static_cast<Eigen::Index>(n1) * n3);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) t(i, j, k) = m(j, i * n3 + k);
      break;
    case 3:
      check(n3, static_cast<Eigen::Index>(n1) * n2);
      for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
          for (int k = 0; k < n3; ++k) t(i, j, k) = m(k, i * n2 + j);
      break;
    default:
      throw ShapeError("mode_n_fold: mode must be 1, 2, or 3");
  }
  return t;
}

void TuckerFactors::validate() const {
  if (G.n1() != d1() || G.n2() != d2() || G.n3() != d3())
    throw ShapeError("TuckerFactors: core shape (" + std::to_string(G.n1()) + "," +
                     std::to_string(G.n2()) + "," + std::to_string(G.n3()) +
                     ") does not match factor ranks");
  if (U.rows() == 0 || V.rows() == 0 || W.rows() == 0)
    throw ShapeError("TuckerFactors: empty factor");
}

Tensor3 superdiagonal_core(const Eigen::VectorXd& weights) {
  const int d = static_cast<int>(weights.size());
  Tensor3 g(d, d, d);
  for (int i = 0; i < d; ++i) g(i, i, i) = weights[i];
  return g;
}

bool is_superdiagonal(const Tensor3& g) {
  if (g.n1() != g.n2() || g.n2() != g.n3()) return false;
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.n2(); ++j)
      for (int k = 0; k < g.n3(); ++k)
        if (!(i == j && j == k) && g(i, j, k) != 0.0) return false;
  return true;
}

Tensor3 materialize(const TuckerFactors& f) {
  f.validate();
  const Eigen::MatrixXd g1 = mode_n_matricize(f.G, 1);
  const Eigen::MatrixXd a1 = f.U * g1 * kron(f.V, f.W).transpose();
  return mode_n_fold(a1, 1, f.n1(), f.n2(), f.n3());
}

Eigen::VectorXd contract_23(const Tensor3& a, const Eigen::MatrixXd& x) {
  if (x.rows() != a.n2() || x.cols() != a.n3())
    throw ShapeError("contract_23: window shape does not match tensor modes 2,3");
  return mode_n_matricize(a, 1) * vec_rm(x);
}

Eigen::VectorXd predict_mean(const TuckerFactors& f, const Eigen::MatrixXd& x) {
  if (x.rows() != f.n2() || x.cols() != f.n3())
    throw ShapeError("predict_mean: window shape does not match factors");
  const Eigen::MatrixXd g1 = mode_n_matricize(f.G, 1);
  return f.U * (g1 * vec_rm(f.V.transpose() * x * f.W));
}

PredictMeanForms predict_mean_forms(const TuckerFactors& f, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd g1 = mode_n_matricize(f.G, 1);
  const Eigen::MatrixXd xw = x * f.W;
  const Eigen::MatrixXd vtx = f.V.transpose() * x;
  const int d2 = f.d2(), d3 = f.d3();

  PredictMeanForms out;
  out.output_form = f.U * (g1 * vec_rm(f.V.transpose() * xw));
  out.input_form =
      f.U * g1 *
      (kron(Eigen::MatrixXd::Identity(d2, d2), xw.transpose()) * vec_rm(f.V.transpose()));
  out.lag_form =
      f.U * g1 * (kron(vtx, Eigen::MatrixXd::Identity(d3, d3)) * vec_rm(f.W));
  Eigen::MatrixXd m_row = vec_rm(f.V.transpose() * xw).transpose();
  out.core_form = kron(f.U, m_row) * vec_rm(g1);
  return out;
}

}  // namespace salt
