#pragma once

#include <Eigen/Dense>
#include <vector>

namespace matfdr {

struct Sample {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

// Noisy entry observations of a d1 x d2 matrix, sampled with replacement;
// duplicate (row, col) pairs are legitimate and contribute separately.
struct ObservationSet {
  int d1 = 0;
  int d2 = 0;
  std::vector<Sample> samples;

  int n() const { return static_cast<int>(samples.size()); }

  /// Throws std::invalid_argument on out-of-range indices or an empty set.
  void validate() const;

  /// (d1 d2 / n) * sum_i y_i e_{r_i} e_{c_i}^T, the rescaled zero-filled
  /// observation matrix used for spectral initialization.
  Eigen::MatrixXd rescaled_zero_fill() const;
};

}  // namespace matfdr
