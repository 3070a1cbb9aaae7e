#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "matfdr/inference.hpp"

namespace matfdr {

struct HypothesisSet {
  std::vector<LinearForm> forms;
  std::optional<std::vector<bool>> truth;  // true = signal, when known

  int q() const { return static_cast<int>(forms.size()); }
  void validate() const;
};

enum class Aggregation { multiply, min_abs, sum_abs, none_bhq };

/// Uniformly random partition into halves of sizes ceil(n/2) and floor(n/2);
/// deterministic for a given seed.
std::pair<ObservationSet, ObservationSet> split_observations(
    const ObservationSet& obs, std::uint64_t seed);

/// multiply: w1 w2; min_abs: sign(w1 w2) min(|w1|,|w2|);
/// sum_abs: sign(w1 w2) (|w1|+|w2|).
double aggregate(double w1, double w2, Aggregation scheme);

/// L = inf{t > 0 : #{w < -t} / (#{w > t} v 1) <= alpha}, scanned over the
/// nonzero |w| values plus one candidate below the smallest; +infinity when
/// no candidate satisfies the constraint.
double data_driven_threshold(const std::vector<double>& w_rank, double alpha);

struct Score {
  double fdp = 0.0;
  double power = 0.0;
};

Score score(const std::vector<int>& rejected, const std::vector<bool>& truth);

struct SplitRecordPair {
  TestRecord first;
  TestRecord second;
};

/// One-sided handling: for side greater (less), forms whose statistics are
/// negative (positive) on both splits are removed before aggregation and
/// thresholding. Returns the indices kept, in order.
std::vector<int> one_sided_prefilter(const std::vector<SplitRecordPair>& records,
                                     Side side);

// Everything computed per split, shared by the aggregation schemes and by the
// whitening procedure so Monte-Carlo trials pay for the estimates once.
struct SplitStatistics {
  Estimate first;
  Estimate second;
  int n1 = 0;
  int n2 = 0;
  std::vector<SplitRecordPair> records;  // one per form; NaN w when untestable
  std::vector<int> untestable;           // form indices excluded from testing
};

SplitStatistics compute_split_statistics(const ObservationSet& obs,
                                         const HypothesisSet& hypotheses,
                                         const GdConfig& cfg);

struct RejectionResult {
  double threshold = std::numeric_limits<double>::infinity();
  std::vector<int> rejected;
  std::vector<double> w_rank;  // per form; NaN for untestable/prefiltered forms
  std::vector<SplitRecordPair> records;
  std::vector<int> untestable;
  std::vector<int> prefiltered;  // dropped by the one-sided rule
  std::optional<double> fdp;
  std::optional<double> power;
};

/// Data splitting, per-split statistics, symmetric aggregation and
/// data-driven thresholding at FDR level alpha.
RejectionResult run_aggregation(const ObservationSet& obs,
                                const HypothesisSet& hypotheses,
                                const GdConfig& cfg, Aggregation scheme,
                                double alpha);

/// Aggregation/threshold tail of run_aggregation, reusable on precomputed
/// split statistics.
RejectionResult finish_aggregation(const SplitStatistics& stats,
                                   const HypothesisSet& hypotheses,
                                   Aggregation scheme, double alpha, Side side);

/// Benjamini-Hochberg step-up on normal p-values; returns rejected indices.
std::vector<int> bh_procedure(const std::vector<double>& w_all, double alpha,
                              Side side);

/// Baseline without splitting: full-data estimate, normal p-values, step-up.
RejectionResult run_bh_baseline(const ObservationSet& obs,
                                const HypothesisSet& hypotheses,
                                const GdConfig& cfg, double alpha);

}  // namespace matfdr
