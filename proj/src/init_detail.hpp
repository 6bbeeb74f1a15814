#pragma once

// Seeded initialization helpers shared by the factored and full-tensor fits.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "salt/hmm.hpp"

namespace salt::detail {

// Lloyd's algorithm on the scored frames with seeded k-means++ starts.
// Deterministic for a fixed seed; empty clusters grab the farthest point.
std::vector<int> kmeans_labels(const Eigen::MatrixXd& series, int lags, int k,
                               std::uint64_t seed);

// Smoothed transition counts from a hard label sequence; the initial
// distribution is biased toward the first label.
TransitionModel chain_from_labels(const std::vector<int>& labels, int num_states);

}  // namespace salt::detail
