#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "salt/tensor.hpp"

namespace salt {

// Evaluation summary; the optional fields only apply when ground truth
// (tensors or state labels) is available.
struct EvalReport {
  double per_frame_loglik = 0.0;
  double explained_variance = 0.0;
  std::optional<double> tensor_mse;
  std::optional<double> seg_accuracy;
  std::optional<Eigen::MatrixXi> confusion;    // rows: given labels, cols: predicted
  std::optional<std::vector<int>> permutation;  // predicted state -> given state
};

// 1 - ||truth - pred||_F^2 / ||truth - mean(truth)||_F^2 with per-column
// means. A constant truth series leaves the ratio undefined.
[[nodiscard]] double explained_variance(const Eigen::MatrixXd& pred,
                                        const Eigen::MatrixXd& truth);

// Mean squared entrywise error between two per-state tensor stacks, with
// estimated state j compared against truth[perm[j]].
[[nodiscard]] double tensor_mse(const std::vector<Tensor3>& estimated,
                                const std::vector<Tensor3>& truth,
                                const std::vector<int>& perm);

// Identity permutation convenience overload.
[[nodiscard]] double tensor_mse(const std::vector<Tensor3>& estimated,
                                const std::vector<Tensor3>& truth);

// The relabeling perm (predicted j -> given perm[j]) maximizing the matched
// count sum(confusion(perm[j], j)), found by exhaustive search; ties pick the
// lexicographically smallest permutation. Supports at most 10 states.
[[nodiscard]] std::vector<int> align_states(const Eigen::MatrixXi& confusion);

struct SegmentationResult {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;     // rows: given labels, cols: predicted labels
  std::vector<int> permutation;  // predicted state -> given state
};

// Fraction of frames whose predicted label matches the given label after the
// best relabeling, together with the unpermuted confusion counts.
[[nodiscard]] SegmentationResult segmentation_accuracy(const std::vector<int>& pred,
                                                       const std::vector<int>& truth);

}  // namespace salt
