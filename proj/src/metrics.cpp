#include "salt/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "salt/errors.hpp"

namespace salt {

double explained_variance(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ShapeError("prediction and truth shapes differ");
  if (truth.rows() == 0) throw DataError("explained variance of an empty series");
  Eigen::MatrixXd centered = truth;
  centered.rowwise() -= truth.colwise().mean();
  const double power = centered.squaredNorm();
  if (power <= 0.0) throw DataError("explained variance is undefined for a constant series");
  return 1.0 - (truth - pred).squaredNorm() / power;
}

double tensor_mse(const std::vector<Tensor3>& estimated, const std::vector<Tensor3>& truth,
                  const std::vector<int>& perm) {
  if (estimated.empty() || estimated.size() != truth.size() || perm.size() != truth.size())
    throw ShapeError("tensor stacks and permutation must have equal, nonzero state counts");
  std::vector<bool> seen(perm.size(), false);
  for (int p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= perm.size() || seen[static_cast<std::size_t>(p)])
      throw ShapeError("state permutation is not a bijection");
    seen[static_cast<std::size_t>(p)] = true;
  }

  double total = 0.0;
  std::size_t entries = 0;
  for (std::size_t h = 0; h < estimated.size(); ++h) {
    const Tensor3& e = estimated[h];
    const Tensor3& t = truth[static_cast<std::size_t>(perm[h])];
    if (e.n1() != t.n1() || e.n2() != t.n2() || e.n3() != t.n3())
      throw ShapeError("tensor shapes differ between estimate and truth");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double diff = e.data()[i] - t.data()[i];
      total += diff * diff;
    }
    entries += e.size();
  }
  return total / static_cast<double>(entries);
}

double tensor_mse(const std::vector<Tensor3>& estimated, const std::vector<Tensor3>& truth) {
  std::vector<int> identity(estimated.size());
  std::iota(identity.begin(), identity.end(), 0);
  return tensor_mse(estimated, truth, identity);
}

std::vector<int> align_states(const Eigen::MatrixXi& confusion) {
  const Eigen::Index h = confusion.rows();
  if (h == 0 || confusion.cols() != h) throw ShapeError("confusion matrix must be square");
  if (h > 10) throw DataError("state alignment supports at most 10 states");
  if ((confusion.array() < 0).any()) throw DataError("confusion counts must be non-negative");

  std::vector<int> perm(static_cast<std::size_t>(h));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  long best_score = -1;
  do {
    long score = 0;
    for (Eigen::Index j = 0; j < h; ++j) score += confusion(perm[static_cast<std::size_t>(j)], j);
    if (score > best_score) {  // strict: keeps the lexicographically first maximizer
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

SegmentationResult segmentation_accuracy(const std::vector<int>& pred,
                                         const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw ShapeError("label sequences have different lengths");
  if (pred.empty()) throw DataError("segmentation accuracy of empty sequences");

  int num_states = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (pred[t] < 0 || truth[t] < 0) throw DataError("state labels must be non-negative");
    num_states = std::max({num_states, pred[t] + 1, truth[t] + 1});
  }

  SegmentationResult out;
  out.confusion = Eigen::MatrixXi::Zero(num_states, num_states);
  for (std::size_t t = 0; t < pred.size(); ++t) ++out.confusion(truth[t], pred[t]);
  out.permutation = align_states(out.confusion);

  long matched = 0;
  for (int j = 0; j < num_states; ++j)
    matched += out.confusion(out.permutation[static_cast<std::size_t>(j)], j);
  out.accuracy = static_cast<double>(matched) / static_cast<double>(pred.size());
  return out;
}

}  // namespace salt
