#pragma once

#include <Eigen/Dense>
#include <vector>

namespace matfdr {

enum class Side { two_sided, greater, less };

struct FormEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

// Sparse test matrix T for one hypothesis <M, T> = theta. Entries are
// coalesced and the l1/Frobenius norms cached at construction; an empty or
// zero form is rejected.
class LinearForm {
 public:
  LinearForm(std::vector<FormEntry> entries, double theta,
             Side side = Side::two_sided);

  static LinearForm entry(int i, int j, double theta = 0.0,
                          Side side = Side::two_sided);
  /// T = e_i e_j^T - e_k e_l^T, the difference of two entries.
  static LinearForm entry_difference(int i, int j, int k, int l,
                                     double theta = 0.0,
                                     Side side = Side::two_sided);

  const std::vector<FormEntry>& entries() const { return entries_; }
  double theta() const { return theta_; }
  void set_theta(double theta) { theta_ = theta; }
  Side side() const { return side_; }

  double l1_norm() const { return l1_; }
  double fro_norm() const { return fro_; }

  /// <M, T> for a dense matrix M.
  double inner(const Eigen::MatrixXd& m) const;

  Eigen::MatrixXd to_dense(int d1, int d2) const;

  int max_row() const { return max_row_; }
  int max_col() const { return max_col_; }

 private:
  std::vector<FormEntry> entries_;
  double theta_ = 0.0;
  Side side_ = Side::two_sided;
  double l1_ = 0.0;
  double fro_ = 0.0;
  int max_row_ = 0;
  int max_col_ = 0;
};

}  // namespace matfdr
