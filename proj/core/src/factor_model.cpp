#include "matfdr/factor_model.hpp"

#include <algorithm>

namespace matfdr {

double FactorModel::orthonormality_defect() const {
  const int r = rank();
  const Eigen::MatrixXd iu =
      (U.transpose() * U - Eigen::MatrixXd::Identity(r, r)).cwiseAbs();
  const Eigen::MatrixXd iv =
      (V.transpose() * V - Eigen::MatrixXd::Identity(r, r)).cwiseAbs();
  return std::max(iu.maxCoeff(), iv.maxCoeff());
}

double FactorModel::incoherence() const {
  const double u_max = U.rowwise().squaredNorm().maxCoeff();
  const double v_max = V.rowwise().squaredNorm().maxCoeff();
  return std::max(static_cast<double>(U.rows()) * u_max,
                  static_cast<double>(V.rows()) * v_max) /
         static_cast<double>(rank());
}

double FactorModel::condition_number() const {
  return S(0) / S(S.size() - 1);
}

namespace {
int first_nonzero_row(const Eigen::MatrixXd& m, int col) {
  for (int i = 0; i < m.rows(); ++i)
    if (m(i, col) != 0.0) return i;
  return -1;
}
}  // namespace

void canonicalize_basis(Eigen::MatrixXd& basis) {
  for (int k = 0; k < basis.cols(); ++k) {
    const int i = first_nonzero_row(basis, k);
    if (i >= 0 && basis(i, k) < 0.0) basis.col(k) = -basis.col(k);
  }
}

void canonicalize_svd_pair(Eigen::MatrixXd& u, Eigen::MatrixXd& v) {
  for (int k = 0; k < u.cols(); ++k) {
    const int i = first_nonzero_row(u, k);
    if (i >= 0 && u(i, k) < 0.0) {
      u.col(k) = -u.col(k);
      v.col(k) = -v.col(k);
    }
  }
}

}  // namespace matfdr
