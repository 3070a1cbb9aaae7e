#pragma once

#include "matfdr/multitest.hpp"

namespace matfdr {

// The hypothesis family viewed as a q x (d1 d2) stack of vectorized forms.
// Rows must be linearly independent and q may not exceed (d1+d2) r - r^2,
// the rank of the tangent-space projector.
struct DesignStack {
  int d1 = 0;
  int d2 = 0;
  std::vector<LinearForm> forms;

  int q() const { return static_cast<int>(forms.size()); }
  /// Throws std::invalid_argument on q > (d1+d2) r - r^2 or dependent rows
  /// (Gram rank checked with relative tolerance 1e-8).
  void validate(int rank) const;
};

/// Sigma_{ij} = <P(T_i), P(T_j)> assembled from per-form tangent summaries;
/// the d1 d2 x d1 d2 projector is never materialized.
Eigen::MatrixXd estimate_sigma(const DesignStack& stack, const Eigen::MatrixXd& u,
                               const Eigen::MatrixXd& v);

struct InverseSqrt {
  Eigen::MatrixXd m;
  int clamped = 0;  // eigenvalues raised to the floor
};

/// Symmetric inverse square root with eigenvalues clamped below at `floor`.
InverseSqrt inverse_sqrt(const Eigen::MatrixXd& s, double floor);

struct CovarianceEstimate {
  Eigen::MatrixXd sigma;          // q x q covariance
  Eigen::MatrixXd corr;           // unit-diagonal correlation matrix
  Eigen::MatrixXd corr_inv_sqrt;  // R^{-1/2} after flooring
  double eigen_floor = 0.0;
  int clamped = 0;
};

/// Covariance, correlation and R^{-1/2} with floor 1e-6 lambda_max(R).
CovarianceEstimate build_covariance(const DesignStack& stack,
                                    const Eigen::MatrixXd& u,
                                    const Eigen::MatrixXd& v);

struct LassoResult {
  Eigen::VectorXd coef;
  bool converged = false;
  int sweeps = 0;
  double gap = 0.0;
};

/// minimize (1/2)|response - design w|^2 + lambda |w|_1 by cyclic coordinate
/// descent, to duality gap 1e-8 (relative to the response energy) or 1e4
/// sweeps. Non-convergence is flagged and the last iterate returned.
LassoResult lasso(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  double lambda);

struct OlsRefit {
  Eigen::VectorXd coef;   // aligned with input columns, zero where dropped
  Eigen::VectorXd sigma;  // sqrt(e_i^T (X^T X)^{-1} e_i), zero where dropped
  std::vector<int> dropped;
};

/// Least squares on the given columns; linearly dependent columns are dropped
/// via a pivoted factorization.
OlsRefit ols_refit(const Eigen::MatrixXd& design_cols, const Eigen::VectorXd& response);

struct ScreeningResult {
  std::vector<int> support;
  Eigen::VectorXd w1;       // Lasso coefficients
  Eigen::VectorXd w2;       // refit, zero off the support
  Eigen::VectorXd sigma_w;  // refit sd scale, zero off the support
  Eigen::VectorXd w_rank;   // w1 w2 / sigma_w on the support, zero elsewhere
  bool lasso_converged = true;
};

/// Whitening + screening on unnormalized statistics: sigma is the covariance
/// of the stat vectors, X = sigma^{-1/2}, the Lasso design is X diag(sqrt
/// diag(sigma)) and the refit runs on the support columns of X.
ScreeningResult screen_and_refit(const Eigen::MatrixXd& sigma,
                                 const Eigen::VectorXd& stat1,
                                 const Eigen::VectorXd& stat2, double lambda,
                                 double floor_scale = 1e-6);

/// Same procedure phrased on the correlation matrix and normalized
/// statistics; algebraically identical decisions to screen_and_refit when
/// corr/z are the normalized counterparts of sigma/stat.
ScreeningResult screen_and_refit_normalized(const Eigen::MatrixXd& corr,
                                            const Eigen::VectorXd& z1,
                                            const Eigen::VectorXd& z2,
                                            double lambda,
                                            double floor_scale = 1e-6);

struct WhiteningResult {
  RejectionResult rejection;
  Eigen::VectorXd w1, w2, sigma_w;  // per form; NaN where excluded
  std::vector<int> support;         // form indices kept by the Lasso
  bool lasso_converged = true;
};

/// Split, estimate, whiten by the split-1 covariance estimate, screen with
/// Lasso at lambda = lambda_scale sqrt(log d1), refit on split 2 and apply
/// the data-driven threshold at FDR level alpha.
WhiteningResult run_whitening(const ObservationSet& obs,
                              const HypothesisSet& hypotheses, const GdConfig& cfg,
                              double alpha, double lambda_scale);

/// Tail of run_whitening on precomputed split statistics.
WhiteningResult finish_whitening(const SplitStatistics& stats,
                                 const HypothesisSet& hypotheses, int rank,
                                 double alpha, double lambda_scale, Side side);

struct PairClassification {
  // Unordered representatives (i <= j); beta_s counts ordered pairs.
  std::vector<std::pair<int, int>> strong;
  std::vector<std::pair<int, int>> weak;
  double beta_s = 0.0;
  double threshold = 0.0;  // c q0^{-nu}
};

/// Pairs of null-labeled forms (all forms when truth is absent) with
/// correlation >= c q0^{-nu}; `absolute` switches to |rho|.
PairClassification classify_pairs(const HypothesisSet& hypotheses,
                                  const Eigen::MatrixXd& u,
                                  const Eigen::MatrixXd& v, double nu, double c,
                                  bool absolute = false);

}  // namespace matfdr
