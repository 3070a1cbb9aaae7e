#include "matfdr/observations.hpp"

#include <stdexcept>

namespace matfdr {

void ObservationSet::validate() const {
  if (d1 < 1 || d2 < 1)
    throw std::invalid_argument("ObservationSet: dimensions must be positive");
  if (samples.empty())
    throw std::invalid_argument("ObservationSet: at least one sample required");
  for (const Sample& s : samples) {
    if (s.row < 0 || s.row >= d1 || s.col < 0 || s.col >= d2)
      throw std::invalid_argument("ObservationSet: sample index out of range");
  }
}

Eigen::MatrixXd ObservationSet::rescaled_zero_fill() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d1, d2);
  const double scale = static_cast<double>(d1) * static_cast<double>(d2) /
                       static_cast<double>(samples.size());
  for (const Sample& s : samples) m(s.row, s.col) += scale * s.value;
  return m;
}

}  // namespace matfdr
