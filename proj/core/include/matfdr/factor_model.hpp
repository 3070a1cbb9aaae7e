#pragma once

#include <Eigen/Dense>

namespace matfdr {

// Rank-r factorization U diag(S) V^T with orthonormal U, V and nonincreasing
// positive S. `dense` optionally carries the materialized estimate.
struct FactorModel {
  Eigen::MatrixXd U;      // d1 x r
  Eigen::MatrixXd V;      // d2 x r
  Eigen::VectorXd S;      // r
  Eigen::MatrixXd dense;  // d1 x d2, or empty when absent

  int rank() const { return static_cast<int>(S.size()); }
  bool has_dense() const { return dense.size() > 0; }

  Eigen::MatrixXd reconstruct() const { return U * S.asDiagonal() * V.transpose(); }

  /// max-norm deviation of U^T U and V^T V from the identity.
  double orthonormality_defect() const;

  /// mu = max(d1 |U|_{2,max}^2, d2 |V|_{2,max}^2) / r.
  double incoherence() const;

  double condition_number() const;
};

/// Flip column signs so the first nonzero entry of each column is positive.
/// Used for bases that are only determined up to per-column sign.
void canonicalize_basis(Eigen::MatrixXd& basis);

/// Sign convention for an SVD pair: the first nonzero entry of each U column
/// is made positive and the matching V column is flipped with it.
void canonicalize_svd_pair(Eigen::MatrixXd& u, Eigen::MatrixXd& v);

}  // namespace matfdr
