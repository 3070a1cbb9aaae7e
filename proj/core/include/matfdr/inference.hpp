#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "matfdr/completion.hpp"
#include "matfdr/linear_form.hpp"

namespace matfdr {

// A form whose projection or noise variance vanishes cannot be tested.
struct UntestableForm : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Projection of a dense matrix onto the tangent space at U diag(.) V^T,
/// computed as T - (I - U U^T) T (I - V V^T).
Eigen::MatrixXd tangent_project(const Eigen::MatrixXd& t,
                                const Eigen::MatrixXd& u,
                                const Eigen::MatrixXd& v);

Eigen::MatrixXd tangent_project(const LinearForm& form, const Eigen::MatrixXd& u,
                                const Eigen::MatrixXd& v);

// Compact representation of a projected form: U^T T, T V and U^T T V
// determine the projection, its norm and inner products with other
// projections without touching d1 x d2 storage.
struct TangentSummary {
  Eigen::MatrixXd ut_t;    // r x d2
  Eigen::MatrixXd t_v;     // d1 x r
  Eigen::MatrixXd ut_t_v;  // r x r
  double norm2 = 0.0;      // |P(T)|_F^2
};

TangentSummary summarize_projection(const LinearForm& form,
                                    const Eigen::MatrixXd& u,
                                    const Eigen::MatrixXd& v);

/// <P(T_a), P(T_b)> from the compact summaries.
double projection_inner(const TangentSummary& a, const TangentSummary& b);

struct AlignmentRatio {
  double value = 0.0;
  bool degenerate = false;  // |P(T)|_F = 0; the form is untestable
};

/// beta_T = (|P(T)|_F / |T|_F) sqrt(d2 / r).
AlignmentRatio alignment_ratio(const LinearForm& form, const Eigen::MatrixXd& u,
                               const Eigen::MatrixXd& v);

/// Mean squared residual of the initial estimate on the samples.
double noise_variance_estimate(const ObservationSet& obs, const FactorModel& init);

/// |P_init(T)|_F, the sampling standard deviation scale of <M_hat, T>.
double sampling_sd_estimate(const LinearForm& form, const FactorModel& init);

enum class SplitId { first, second, all };

struct TestRecord {
  int form_id = -1;
  double w = 0.0;             // standardized statistic
  double point = 0.0;         // <M_hat, T>
  double sigma_xi_hat = 0.0;  // noise sd estimate
  double s_hat = 0.0;         // sampling sd estimate
  SplitId split = SplitId::all;
};

/// W = (<M_hat, T> - theta) / (sigma_xi_hat * s_hat * sqrt(d1 d2 / n)).
/// Throws UntestableForm when either variance estimate vanishes.
TestRecord test_statistic(const LinearForm& form, const FactorModel& model,
                          const FactorModel& init, const ObservationSet& obs);

/// Two-sided normal interval <M_hat,T> +- z_{(1+level)/2} sigma s sqrt(d1 d2/n).
std::pair<double, double> confidence_interval(const LinearForm& form,
                                              const FactorModel& model,
                                              const FactorModel& init,
                                              const ObservationSet& obs,
                                              double level);

/// Asymptotic correlation <P(T1),P(T2)> / (|P(T1)| |P(T2)|) of two statistics.
double pair_correlation(const LinearForm& a, const LinearForm& b,
                        const Eigen::MatrixXd& u, const Eigen::MatrixXd& v);

/// Empirical 2k-th moment (1/m) sum w^(2k); k >= 2.
double moment_diagnostic(const std::vector<double>& w_samples, int k);

}  // namespace matfdr
