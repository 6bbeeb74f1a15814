#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace salt {

// Dense 3-way array, row-major: entry (i, j, k) sits at (i*n2 + j)*n3 + k.
// All vectorization in this codebase follows the same row-major convention.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int n1, int n2, int n3);

  double& operator()(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * n2_ + j) * n3_ + k];
  }
  double operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * n2_ + j) * n3_ + k];
  }

  [[nodiscard]] int n1() const { return n1_; }
  [[nodiscard]] int n2() const { return n2_; }
  [[nodiscard]] int n3() const { return n3_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] const std::vector<double>& data() const { return data_; }
  [[nodiscard]] std::vector<double>& data() { return data_; }

  [[nodiscard]] bool all_finite() const;

  void set_zero();

 private:
  int n1_ = 0, n2_ = 0, n3_ = 0;
  std::vector<double> data_;
};

// vec of a matrix in row-major order: element (i, j) lands at i*cols + j.
[[nodiscard]] Eigen::VectorXd vec_rm(const Eigen::MatrixXd& m);
[[nodiscard]] Eigen::MatrixXd unvec_rm(const Eigen::VectorXd& v, int rows, int cols);

[[nodiscard]] Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Mode-n matricization keeping the remaining modes in their original order,
// flattened row-major. For shape (n1, n2, n3):
//   mode 1: n1 x (n2*n3), column j*n3 + k
//   mode 2: n2 x (n1*n3), column i*n3 + k
//   mode 3: n3 x (n1*n2), column i*n2 + j
[[nodiscard]] Eigen::MatrixXd mode_n_matricize(const Tensor3& t, int mode);
[[nodiscard]] Tensor3 mode_n_fold(const Eigen::MatrixXd& m, int mode, int n1, int n2, int n3);

// Low-rank factorization of a stack of AR coefficient tensors. The core G is
// a full (d1, d2, d3) tensor; CP is the special case of a superdiagonal core.
struct TuckerFactors {
  Eigen::MatrixXd U;  // n1 x d1, output subspace
  Eigen::MatrixXd V;  // n2 x d2, input subspace
  Eigen::MatrixXd W;  // n3 x d3, lag subspace
  Tensor3 G;          // d1 x d2 x d3

  [[nodiscard]] int n1() const { return static_cast<int>(U.rows()); }
  [[nodiscard]] int n2() const { return static_cast<int>(V.rows()); }
  [[nodiscard]] int n3() const { return static_cast<int>(W.rows()); }
  [[nodiscard]] int d1() const { return static_cast<int>(U.cols()); }
  [[nodiscard]] int d2() const { return static_cast<int>(V.cols()); }
  [[nodiscard]] int d3() const { return static_cast<int>(W.cols()); }

  void validate() const;  // throws ShapeError on inconsistent dimensions
};

// Superdiagonal core with G(i,i,i) = weights[i], zero elsewhere.
[[nodiscard]] Tensor3 superdiagonal_core(const Eigen::VectorXd& weights);

// True when every off-superdiagonal entry is exactly zero.
[[nodiscard]] bool is_superdiagonal(const Tensor3& g);

// Full tensor from factors: A(1) = U * G(1) * kron(V, W)^T.
[[nodiscard]] Tensor3 materialize(const TuckerFactors& f);

// y[i] = sum_{j,k} A(i, j, k) * X(j, k) for X of shape (n2, n3).
[[nodiscard]] Eigen::VectorXd contract_23(const Tensor3& a, const Eigen::MatrixXd& x);

// Predictive mean through the factors without materializing the full tensor:
// U * G(1) * vec_rm(V^T X W). X is the (n2, n3) lag window.
[[nodiscard]] Eigen::VectorXd predict_mean(const TuckerFactors& f, const Eigen::MatrixXd& x);

// Diagnostic: the same mean computed four ways, each isolating one factor as
// the unknown of a linear map (output / input / lag / core). All four must
// agree; disagreement indicates a vectorization-convention bug.
struct PredictMeanForms {
  Eigen::VectorXd output_form;  // linear in vec(U)
  Eigen::VectorXd input_form;   // linear in vec(V^T)
  Eigen::VectorXd lag_form;     // linear in vec(W)
  Eigen::VectorXd core_form;    // linear in vec(G)
};
[[nodiscard]] PredictMeanForms predict_mean_forms(const TuckerFactors& f,
                                                  const Eigen::MatrixXd& x);

}  // namespace salt
