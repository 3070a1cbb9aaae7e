#include "matfdr/linear_form.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace matfdr {

LinearForm::LinearForm(std::vector<FormEntry> entries, double theta, Side side)
    : theta_(theta), side_(side) {
  if (entries.empty())
    throw std::invalid_argument("LinearForm: at least one entry required");
  for (const FormEntry& e : entries) {
    if (e.row < 0 || e.col < 0)
      throw std::invalid_argument("LinearForm: negative index");
  }
  std::sort(entries.begin(), entries.end(), [](const FormEntry& a, const FormEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  // Coalesce duplicate positions.
  for (const FormEntry& e : entries) {
    if (!entries_.empty() && entries_.back().row == e.row &&
        entries_.back().col == e.col) {
      entries_.back().value += e.value;
    } else {
      entries_.push_back(e);
    }
  }
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [](const FormEntry& e) { return e.value == 0.0; }),
                 entries_.end());
  if (entries_.empty())
    throw std::invalid_argument("LinearForm: all entries cancel to zero");
  double sq = 0.0;
  for (const FormEntry& e : entries_) {
    l1_ += std::abs(e.value);
    sq += e.value * e.value;
    max_row_ = std::max(max_row_, e.row);
    max_col_ = std::max(max_col_, e.col);
  }
  fro_ = std::sqrt(sq);
  if (!(fro_ > 0.0))
    throw std::invalid_argument("LinearForm: zero Frobenius norm");
}

LinearForm LinearForm::entry(int i, int j, double theta, Side side) {
  return LinearForm({{i, j, 1.0}}, theta, side);
}

LinearForm LinearForm::entry_difference(int i, int j, int k, int l, double theta,
                                        Side side) {
  return LinearForm({{i, j, 1.0}, {k, l, -1.0}}, theta, side);
}

double LinearForm::inner(const Eigen::MatrixXd& m) const {
  double acc = 0.0;
  for (const FormEntry& e : entries_) acc += e.value * m(e.row, e.col);
  return acc;
}

Eigen::MatrixXd LinearForm::to_dense(int d1, int d2) const {
  if (max_row_ >= d1 || max_col_ >= d2)
    throw std::invalid_argument("LinearForm: entry outside matrix dimensions");
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(d1, d2);
  for (const FormEntry& e : entries_) t(e.row, e.col) = e.value;
  return t;
}

}  // namespace matfdr
