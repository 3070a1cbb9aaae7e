#pragma once

#include <cstdint>

#include "matfdr/factor_model.hpp"
#include "matfdr/observations.hpp"

namespace matfdr {

struct GdConfig {
  int rank = 1;
  // Step size for factored gradient descent; values <= 0 select the default
  // 0.2 / lambda_1 of the spectral initializer.
  double step_size = 0.0;
  int max_iters = 400;
  double tol = 1e-8;  // relative objective change
  std::uint64_t seed = 0;

  void validate(const ObservationSet& obs) const;
};

struct GdResult {
  FactorModel model;  // dense always populated
  bool converged = false;
  int iters = 0;
  double objective = 0.0;
};

/// Rank-r estimate minimizing the factored squared loss
///   (d1 d2 / 2n) sum_s (<A B^T, e_i e_j^T> - y_s)^2 + (1/8) |A^T A - B^T B|_F^2
/// from the rank-r truncated SVD of the rescaled zero-filled matrix, with the
/// final factors re-orthonormalized by an SVD of A B^T.
GdResult gradient_descent_init(const ObservationSet& obs, const GdConfig& cfg);

/// One-step bias correction:
///   M_init + (d1 d2 / n) sum_s (y_s - <M_init, e_i e_j^T>) e_i e_j^T.
Eigen::MatrixXd debias(const FactorModel& init, const ObservationSet& obs);

struct ProjectedFactors {
  Eigen::MatrixXd U;  // d1 x r
  Eigen::MatrixXd V;  // d2 x r
  bool degenerate = false;  // rank of a projected product fell below r
};

/// U = top-r left singular vectors of unbs * V_init,
/// V = top-r left singular vectors of unbs^T * U_init.
ProjectedFactors incoherence_projection(const Eigen::MatrixXd& unbs,
                                        const FactorModel& init);

/// U U^T * unbs * V V^T, with factors extracted from the r x r core.
FactorModel low_rank_reconstruct(const Eigen::MatrixXd& unbs,
                                 const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& v);

struct Estimate {
  FactorModel model;  // final estimate
  FactorModel init;   // retained for variance estimation downstream
  bool converged = false;
  bool degenerate = false;
};

/// Full pipeline: initialize, debias, project, reconstruct.
Estimate full_estimate(const ObservationSet& obs, const GdConfig& cfg);

}  // namespace matfdr
