#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// deliberately avoid the library's computational shortcuts so they can vouch
// for them.

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <vector>

#include "matfdr/factor_model.hpp"
#include "matfdr/linear_form.hpp"
#include "matfdr/rng.hpp"

namespace testsupport {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Rank-r model with near-flat incoherence (QR of a random sign matrix), used
// where a test checks an error *rate* and should not be dominated by the
// incoherence spikes a Gaussian model carries.
inline matfdr::FactorModel flat_model(int d1, int d2, int r, double lam,
                                      std::uint64_t seed) {
  matfdr::Rng rng(seed);
  MatrixXd gu(d1, r), gv(d2, r);
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < d1; ++i) gu(i, j) = rng.bernoulli(0.5) ? 1.0 : -1.0;
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < d2; ++i) gv(i, j) = rng.bernoulli(0.5) ? 1.0 : -1.0;
  matfdr::FactorModel m;
  Eigen::HouseholderQR<MatrixXd> qu(gu), qv(gv);
  m.U = qu.householderQ() * MatrixXd::Identity(d1, r);
  m.V = qv.householderQ() * MatrixXd::Identity(d2, r);
  m.S = VectorXd::Constant(r, lam);
  m.dense = m.reconstruct();
  return m;
}

inline MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
  matfdr::Rng rng(seed);
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

// Orthonormal complement of an orthonormal basis, via full QR.
inline MatrixXd orthonormal_complement(const MatrixXd& basis) {
  const int n = static_cast<int>(basis.rows());
  const int r = static_cast<int>(basis.cols());
  Eigen::HouseholderQR<MatrixXd> qr(basis);
  const MatrixXd full_q = qr.householderQ() * MatrixXd::Identity(n, n);
  return full_q.rightCols(n - r);
}

// Tangent projection built from the explicit complements:
// U U^T T V V^T + U U^T T Vp Vp^T + Up Up^T T V V^T.
inline MatrixXd tangent_project_oracle(const MatrixXd& t, const MatrixXd& u,
                                       const MatrixXd& v) {
  const MatrixXd up = orthonormal_complement(u);
  const MatrixXd vp = orthonormal_complement(v);
  const MatrixXd pu = u * u.transpose();
  const MatrixXd pv = v * v.transpose();
  const MatrixXd pup = up * up.transpose();
  const MatrixXd pvp = vp * vp.transpose();
  return pu * t * pv + pu * t * pvp + pup * t * pv;
}

// Exhaustive scan for the data-driven threshold, written independently of the
// library's candidate-grid shortcut.
inline double threshold_oracle(const std::vector<double>& w, double alpha) {
  double smallest = std::numeric_limits<double>::infinity();
  for (double x : w)
    if (x != 0.0) smallest = std::min(smallest, std::abs(x));
  if (!std::isfinite(smallest)) return std::numeric_limits<double>::infinity();

  std::vector<double> grid;
  grid.push_back(smallest / 2.0);
  for (double x : w)
    if (x != 0.0) grid.push_back(std::abs(x));
  double best = std::numeric_limits<double>::infinity();
  int best_pos = 0;
  for (double t : grid) {
    int neg = 0, pos = 0;
    for (double x : w) {
      if (x < -t) ++neg;
      if (x > t) ++pos;
    }
    if (neg <= alpha * std::max(pos, 1) && t < best) {
      best = t;
      best_pos = pos;
    }
  }
  if (best_pos == 0) return std::numeric_limits<double>::infinity();
  return best;
}

// Wilson-Hilferty chi-square tail approximation, good far from the extreme
// tail; used only for goodness-of-fit sanity thresholds.
inline double chi_squared_survival(double stat, int dof) {
  const double k = static_cast<double>(dof);
  const double z = (std::cbrt(stat / k) - (1.0 - 2.0 / (9.0 * k))) /
                   std::sqrt(2.0 / (9.0 * k));
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace testsupport
