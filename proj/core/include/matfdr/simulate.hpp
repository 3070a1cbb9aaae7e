#pragma once

#include <string>

#include "matfdr/whitening.hpp"

namespace matfdr {

enum class NoiseKind { gaussian, exponential_centered, student_t };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  int dof = 0;  // student_t only; must be >= 3 for a finite variance

  void validate() const;
};

/// Random rank-r model: U, V from orthonormalized Gaussian matrices, singular
/// values linearly spaced from kappa*lambda_min down to lambda_min (a single
/// value lambda_min when rank == 1), dense materialized.
FactorModel generate_low_rank(int d1, int d2, int rank, double lambda_min,
                              double kappa, std::uint64_t seed);

/// n i.i.d. uniform index draws with replacement; y = M_ij + noise with the
/// requested distribution scaled to standard deviation sigma_xi.
ObservationSet sample_observations(const FactorModel& model, int n, double sigma_xi,
                                   const NoiseSpec& noise, std::uint64_t seed);

struct SignalAssignment {
  std::vector<double> thetas;
  std::vector<bool> truth;  // true = non-null
};

/// Each form is non-null with probability p; non-null theta = <M,T> - mu_T
/// with |mu_T| = mu (0.5 + U[0,1]) so E|mu_T| = mu, signed uniformly for
/// two-sided tests and toward the alternative for one-sided ones.
SignalAssignment assign_signals(const HypothesisSet& hypotheses,
                                const FactorModel& model, double p, double mu,
                                std::uint64_t seed, Side side);

/// Writes the assignment into the set (thetas and truth labels).
void apply_assignment(HypothesisSet& hypotheses, const SignalAssignment& assignment);

enum class FamilyKind { submatrix, row_comparison, block_comparison, group_sum };

struct FamilyParams {
  int row_begin = 0, row_end = 0;  // half-open ranges
  int col_begin = 0, col_end = 0;
  std::vector<std::vector<int>> groups;  // group_sum: disjoint row groups
  Side side = Side::two_sided;
};

/// submatrix: e_i e_j^T; row_comparison: e_i e_j^T - e_{i+1} e_j^T;
/// block_comparison: e_i e_j^T - e_0 e_0^T (anchor cell skipped);
/// group_sum: sum_{i in G_k} e_i e_j^T over the supplied row groups.
HypothesisSet build_family(FamilyKind kind, int d1, int d2,
                           const FamilyParams& params);

/// rho*(z) = #{(i,j) in [q]^2 : |rho_{T_i,T_j}| > z} / q^2, diagonal included.
double dependence_diagnostic(const HypothesisSet& hypotheses,
                             const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                             double z);

// Procedures the harness can run per trial. The aggregation entries map to
// the three symmetric schemes, bhq is the no-splitting baseline and whiten is
// the screening procedure.
enum class Procedure { multiply, min_abs, sum_abs, bhq, whiten };

std::string procedure_name(Procedure p);
Procedure procedure_from_name(const std::string& name);

struct ScenarioConfig {
  int d1 = 0, d2 = 0, rank = 1;
  double lambda_min = 1.0;
  double kappa = 1.0;
  int n = 0;
  NoiseSpec noise;
  double sigma_xi = 1.0;
  FamilyKind family_kind = FamilyKind::submatrix;
  FamilyParams family;
  double signal_prob = 0.0;
  std::vector<double> signal_levels = {0.0};
  Side side = Side::two_sided;
  std::vector<Procedure> procedures = {Procedure::multiply};
  double alpha = 0.1;
  int reps = 1;
  std::uint64_t seed = 0;
  double lambda_scale = 1.0;
  GdConfig gd;  // rank/seed fields are overridden per scenario and trial
  bool want_roc = false;

  void validate() const;
};

struct MetricsRow {
  Procedure procedure = Procedure::multiply;
  double signal = 0.0;
  double alpha = 0.0;
  double mean_fdp = 0.0, sd_fdp = 0.0;
  double mean_power = 0.0, sd_power = 0.0;
  int reps = 0;
};

struct RocPoint {
  Procedure procedure = Procedure::multiply;
  double signal = 0.0;
  double cutoff = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;          // one per (procedure, signal)
  std::vector<RocPoint> roc;             // present when requested
  int failed_trials = 0;                 // excluded from the aggregates
  std::vector<std::string> failure_messages;
};

/// Independent trials (parallel over trials, streams derived from the seed):
/// generate model, assign signals, sample, run every procedure, score.
MetricsTable monte_carlo(const ScenarioConfig& config, int threads = 0);

}  // namespace matfdr
