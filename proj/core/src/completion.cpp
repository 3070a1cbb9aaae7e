#include "matfdr/completion.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace matfdr {

void GdConfig::validate(const ObservationSet& obs) const {
  obs.validate();
  if (rank < 1 || rank > std::min(obs.d1, obs.d2))
    throw std::invalid_argument("GdConfig: rank must be in [1, min(d1,d2)]");
  if (max_iters < 1)
    throw std::invalid_argument("GdConfig: max_iters must be >= 1");
  if (tol < 0.0) throw std::invalid_argument("GdConfig: tol must be >= 0");
}

namespace {

// Rank-r SVD of the product A B^T computed through QR of the thin factors.
FactorModel svd_of_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qra(a);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qrb(b);
  const int r = static_cast<int>(a.cols());
  const Eigen::MatrixXd qa =
      qra.householderQ() * Eigen::MatrixXd::Identity(a.rows(), r);
  const Eigen::MatrixXd qb =
      qrb.householderQ() * Eigen::MatrixXd::Identity(b.rows(), r);
  const Eigen::MatrixXd ra =
      qra.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rb =
      qrb.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ra * rb.transpose(),
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  FactorModel m;
  m.U = qa * svd.matrixU();
  m.V = qb * svd.matrixV();
  m.S = svd.singularValues();
  canonicalize_svd_pair(m.U, m.V);
  m.dense = m.reconstruct();
  return m;
}

double objective(const ObservationSet& obs, const Eigen::MatrixXd& a,
                 const Eigen::MatrixXd& b, double scale) {
  double data = 0.0;
  for (const Sample& s : obs.samples) {
    const double res = a.row(s.row).dot(b.row(s.col)) - s.value;
    data += res * res;
  }
  const Eigen::MatrixXd gram_gap = a.transpose() * a - b.transpose() * b;
  return 0.5 * scale * data + 0.125 * gram_gap.squaredNorm();
}

}  // namespace

GdResult gradient_descent_init(const ObservationSet& obs, const GdConfig& cfg) {
  cfg.validate(obs);
  const int r = cfg.rank;
  const double scale = static_cast<double>(obs.d1) * static_cast<double>(obs.d2) /
                       static_cast<double>(obs.n());

  // Spectral start: truncated SVD of the rescaled zero-filled matrix.
  Eigen::BDCSVD<Eigen::MatrixXd> svd0(obs.rescaled_zero_fill(),
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s0 = svd0.singularValues().head(r);
  const Eigen::VectorXd root = s0.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd a = svd0.matrixU().leftCols(r) * root.asDiagonal();
  Eigen::MatrixXd b = svd0.matrixV().leftCols(r) * root.asDiagonal();

  const double lambda1 = std::max(s0(0), 1e-12);
  double step = cfg.step_size > 0.0 ? cfg.step_size : 0.2 / lambda1;

  double prev = objective(obs, a, b, scale);
  bool converged = false;
  int iters = 0;
  Eigen::MatrixXd grad_a(obs.d1, r);
  Eigen::MatrixXd grad_b(obs.d2, r);
  for (; iters < cfg.max_iters; ++iters) {
    grad_a.setZero();
    grad_b.setZero();
    for (const Sample& s : obs.samples) {
      const double res = a.row(s.row).dot(b.row(s.col)) - s.value;
      grad_a.row(s.row) += scale * res * b.row(s.col);
      grad_b.row(s.col) += scale * res * a.row(s.row);
    }
    const Eigen::MatrixXd gram_gap = a.transpose() * a - b.transpose() * b;
    grad_a += 0.5 * a * gram_gap;
    grad_b -= 0.5 * b * gram_gap;
    a -= step * grad_a;
    b -= step * grad_b;

    const double cur = objective(obs, a, b, scale);
    if (!(cur <= prev)) {
      // Overshoot (the sampled loss can be much sharper than the spectral
      // scale suggests): revert and halve the step.
      a += step * grad_a;
      b += step * grad_b;
      step *= 0.5;
      if (step < 1e-18 * (cfg.step_size > 0.0 ? cfg.step_size : 0.2 / lambda1)) {
        converged = true;
        ++iters;
        break;
      }
      continue;
    }
    if (std::abs(prev - cur) <= cfg.tol * std::max(std::abs(prev), 1e-300)) {
      prev = cur;
      ++iters;
      converged = true;
      break;
    }
    prev = cur;
  }

  GdResult out;
  out.model = svd_of_product(a, b);
  out.converged = converged;
  out.iters = iters;
  out.objective = prev;
  return out;
}

Eigen::MatrixXd debias(const FactorModel& init, const ObservationSet& obs) {
  obs.validate();
  if (!init.has_dense() || init.dense.rows() != obs.d1 || init.dense.cols() != obs.d2)
    throw std::invalid_argument("debias: init.dense missing or dimension mismatch");
  Eigen::MatrixXd unbs = init.dense;
  const double scale = static_cast<double>(obs.d1) * static_cast<double>(obs.d2) /
                       static_cast<double>(obs.n());
  for (const Sample& s : obs.samples)
    unbs(s.row, s.col) += scale * (s.value - init.dense(s.row, s.col));
  return unbs;
}

ProjectedFactors incoherence_projection(const Eigen::MatrixXd& unbs,
                                        const FactorModel& init) {
  if (unbs.rows() != init.U.rows() || unbs.cols() != init.V.rows())
    throw std::invalid_argument("incoherence_projection: dimension mismatch");
  const int r = init.rank();
  ProjectedFactors out;

  Eigen::BDCSVD<Eigen::MatrixXd> svd_left(unbs * init.V, Eigen::ComputeThinU);
  out.U = svd_left.matrixU().leftCols(r);
  Eigen::BDCSVD<Eigen::MatrixXd> svd_right(unbs.transpose() * init.U,
                                           Eigen::ComputeThinU);
  out.V = svd_right.matrixU().leftCols(r);

  const double tol_left = 1e-12 * std::max(svd_left.singularValues()(0), 1.0);
  const double tol_right = 1e-12 * std::max(svd_right.singularValues()(0), 1.0);
  out.degenerate = svd_left.singularValues()(r - 1) <= tol_left ||
                   svd_right.singularValues()(r - 1) <= tol_right;

  // SVD always returns a full orthonormal block, so rank-deficient products
  // are already completed with an orthonormal complement; only flag them.
  canonicalize_basis(out.U);
  canonicalize_basis(out.V);
  return out;
}

FactorModel low_rank_reconstruct(const Eigen::MatrixXd& unbs,
                                 const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& v) {
  if (unbs.rows() != u.rows() || unbs.cols() != v.rows())
    throw std::invalid_argument("low_rank_reconstruct: dimension mismatch");
  const Eigen::MatrixXd core = u.transpose() * unbs * v;  // r x r
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(core,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  FactorModel m;
  m.U = u * svd.matrixU();
  m.V = v * svd.matrixV();
  m.S = svd.singularValues();
  canonicalize_svd_pair(m.U, m.V);
  m.dense = u * core * v.transpose();
  return m;
}

Estimate full_estimate(const ObservationSet& obs, const GdConfig& cfg) {
  GdResult gd = gradient_descent_init(obs, cfg);
  const Eigen::MatrixXd unbs = debias(gd.model, obs);
  const ProjectedFactors proj = incoherence_projection(unbs, gd.model);
  Estimate out;
  out.model = low_rank_reconstruct(unbs, proj.U, proj.V);
  out.init = std::move(gd.model);
  out.converged = gd.converged;
  out.degenerate = proj.degenerate;
  return out;
}

}  // namespace matfdr
