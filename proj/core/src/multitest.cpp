#include "matfdr/multitest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "matfdr/rng.hpp"
#include "matfdr/stats.hpp"

namespace matfdr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

void HypothesisSet::validate() const {
  if (truth && truth->size() != forms.size())
    throw std::invalid_argument("HypothesisSet: truth length mismatch");
}

std::pair<ObservationSet, ObservationSet> split_observations(
    const ObservationSet& obs, std::uint64_t seed) {
  obs.validate();
  const int n = obs.n();
  if (n < 2)
    throw std::invalid_argument("split_observations: need at least 2 samples");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  const int n1 = (n + 1) / 2;  // odd n: extra sample goes to the first half
  ObservationSet a{obs.d1, obs.d2, {}};
  ObservationSet b{obs.d1, obs.d2, {}};
  a.samples.reserve(n1);
  b.samples.reserve(n - n1);
  for (int i = 0; i < n; ++i)
    (i < n1 ? a : b).samples.push_back(obs.samples[perm[i]]);
  return {std::move(a), std::move(b)};
}

double aggregate(double w1, double w2, Aggregation scheme) {
  const auto sign = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
  switch (scheme) {
    case Aggregation::multiply:
      return w1 * w2;
    case Aggregation::min_abs:
      return sign(w1) * sign(w2) * std::min(std::abs(w1), std::abs(w2));
    case Aggregation::sum_abs:
      return sign(w1) * sign(w2) * (std::abs(w1) + std::abs(w2));
    case Aggregation::none_bhq:
      break;
  }
  throw std::invalid_argument("aggregate: scheme does not aggregate");
}

double data_driven_threshold(const std::vector<double>& w_rank, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("data_driven_threshold: alpha must be in (0,1)");
  std::vector<double> candidates;
  candidates.reserve(w_rank.size() + 1);
  for (double w : w_rank) {
    if (std::isnan(w))
      throw std::invalid_argument("data_driven_threshold: NaN statistic");
    if (w != 0.0) candidates.push_back(std::abs(w));
  }
  if (candidates.empty()) return kInf;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  // One candidate strictly below the smallest magnitude, then the magnitudes.
  candidates.insert(candidates.begin(), 0.5 * candidates.front());

  std::vector<double> sorted(w_rank);
  std::sort(sorted.begin(), sorted.end());
  const auto neg_count = [&](double t) {
    return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), -t) -
                            sorted.begin());
  };
  const auto pos_count = [&](double t) {
    return static_cast<int>(sorted.end() -
                            std::upper_bound(sorted.begin(), sorted.end(), t));
  };
  for (double t : candidates) {
    const int neg = neg_count(t);
    const int pos = pos_count(t);
    if (static_cast<double>(neg) <= alpha * static_cast<double>(std::max(pos, 1))) {
      // A feasible threshold that rejects nothing collapses to +infinity
      // (the counts are monotone, so no larger candidate rejects either).
      return pos > 0 ? t : kInf;
    }
  }
  return kInf;
}

Score score(const std::vector<int>& rejected, const std::vector<bool>& truth) {
  int false_rej = 0, true_rej = 0;
  for (int idx : rejected) {
    if (idx < 0 || idx >= static_cast<int>(truth.size()))
      throw std::invalid_argument("score: rejected index out of range");
    (truth[idx] ? true_rej : false_rej) += 1;
  }
  const int q1 =
      static_cast<int>(std::count(truth.begin(), truth.end(), true));
  Score s;
  s.fdp = static_cast<double>(false_rej) /
          static_cast<double>(std::max<int>(1, static_cast<int>(rejected.size())));
  s.power = q1 == 0 ? 0.0 : static_cast<double>(true_rej) / static_cast<double>(q1);
  return s;
}

std::vector<int> one_sided_prefilter(const std::vector<SplitRecordPair>& records,
                                     Side side) {
  std::vector<int> kept;
  kept.reserve(records.size());
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    const double w1 = records[i].first.w;
    const double w2 = records[i].second.w;
    bool drop = false;
    if (side == Side::greater) drop = w1 < 0.0 && w2 < 0.0;
    if (side == Side::less) drop = w1 > 0.0 && w2 > 0.0;
    if (!drop) kept.push_back(i);
  }
  return kept;
}

SplitStatistics compute_split_statistics(const ObservationSet& obs,
                                         const HypothesisSet& hypotheses,
                                         const GdConfig& cfg) {
  hypotheses.validate();
  SplitStatistics out;
  auto [d1obs, d2obs] = split_observations(obs, cfg.seed);
  out.n1 = d1obs.n();
  out.n2 = d2obs.n();
  out.first = full_estimate(d1obs, cfg);
  out.second = full_estimate(d2obs, cfg);
  out.records.resize(hypotheses.forms.size());
  for (int i = 0; i < hypotheses.q(); ++i) {
    const LinearForm& form = hypotheses.forms[i];
    try {
      TestRecord r1 = test_statistic(form, out.first.model, out.first.init, d1obs);
      TestRecord r2 =
          test_statistic(form, out.second.model, out.second.init, d2obs);
      r1.form_id = i;
      r1.split = SplitId::first;
      r2.form_id = i;
      r2.split = SplitId::second;
      out.records[i] = SplitRecordPair{r1, r2};
    } catch (const UntestableForm&) {
      SplitRecordPair pair;
      pair.first.form_id = i;
      pair.first.split = SplitId::first;
      pair.first.w = kNaN;
      pair.second.form_id = i;
      pair.second.split = SplitId::second;
      pair.second.w = kNaN;
      out.records[i] = pair;
      out.untestable.push_back(i);
    }
  }
  return out;
}

RejectionResult finish_aggregation(const SplitStatistics& stats,
                                   const HypothesisSet& hypotheses,
                                   Aggregation scheme, double alpha, Side side) {
  if (scheme == Aggregation::none_bhq)
    throw std::invalid_argument("finish_aggregation: scheme must aggregate");
  RejectionResult out;
  out.records = stats.records;
  out.untestable = stats.untestable;
  out.w_rank.assign(stats.records.size(), kNaN);

  std::vector<char> testable(stats.records.size(), 1);
  for (int idx : stats.untestable) testable[idx] = 0;

  std::vector<int> considered;
  if (side != Side::two_sided) {
    const std::vector<int> kept = one_sided_prefilter(stats.records, side);
    std::vector<char> keep_mask(stats.records.size(), 0);
    for (int idx : kept) keep_mask[idx] = 1;
    for (int i = 0; i < static_cast<int>(stats.records.size()); ++i) {
      if (!testable[i]) continue;
      if (keep_mask[i])
        considered.push_back(i);
      else
        out.prefiltered.push_back(i);
    }
  } else {
    for (int i = 0; i < static_cast<int>(stats.records.size()); ++i)
      if (testable[i]) considered.push_back(i);
  }

  std::vector<double> finite;
  finite.reserve(considered.size());
  for (int idx : considered) {
    const double w = aggregate(stats.records[idx].first.w,
                               stats.records[idx].second.w, scheme);
    out.w_rank[idx] = w;
    finite.push_back(w);
  }
  out.threshold = finite.empty() ? kInf : data_driven_threshold(finite, alpha);
  for (int idx : considered)
    if (out.w_rank[idx] > out.threshold) out.rejected.push_back(idx);

  if (hypotheses.truth) {
    const Score s = score(out.rejected, *hypotheses.truth);
    out.fdp = s.fdp;
    out.power = s.power;
  }
  return out;
}

RejectionResult run_aggregation(const ObservationSet& obs,
                                const HypothesisSet& hypotheses,
                                const GdConfig& cfg, Aggregation scheme,
                                double alpha) {
  if (hypotheses.q() == 0) {
    RejectionResult empty;
    if (hypotheses.truth) {
      empty.fdp = 0.0;
      empty.power = 0.0;
    }
    return empty;
  }
  const Side side = hypotheses.forms.front().side();
  const SplitStatistics stats = compute_split_statistics(obs, hypotheses, cfg);
  return finish_aggregation(stats, hypotheses, scheme, alpha, side);
}

std::vector<int> bh_procedure(const std::vector<double>& w_all, double alpha,
                              Side side) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("bh_procedure: alpha must be in (0,1)");
  const int q = static_cast<int>(w_all.size());
  std::vector<double> pvals(q);
  for (int i = 0; i < q; ++i) {
    switch (side) {
      case Side::two_sided:
        pvals[i] = 2.0 * (1.0 - normal_cdf(std::abs(w_all[i])));
        break;
      case Side::greater:
        pvals[i] = 1.0 - normal_cdf(w_all[i]);
        break;
      case Side::less:
        pvals[i] = normal_cdf(w_all[i]);
        break;
    }
  }
  std::vector<int> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return pvals[a] < pvals[b]; });
  int k = 0;
  for (int rank = 1; rank <= q; ++rank) {
    if (pvals[order[rank - 1]] <=
        static_cast<double>(rank) * alpha / static_cast<double>(q))
      k = rank;
  }
  std::vector<int> rejected(order.begin(), order.begin() + k);
  std::sort(rejected.begin(), rejected.end());
  return rejected;
}

RejectionResult run_bh_baseline(const ObservationSet& obs,
                                const HypothesisSet& hypotheses,
                                const GdConfig& cfg, double alpha) {
  hypotheses.validate();
  RejectionResult out;
  if (hypotheses.q() == 0) {
    if (hypotheses.truth) {
      out.fdp = 0.0;
      out.power = 0.0;
    }
    return out;
  }
  const Side side = hypotheses.forms.front().side();
  const Estimate est = full_estimate(obs, cfg);
  out.records.resize(hypotheses.forms.size());
  out.w_rank.assign(hypotheses.forms.size(), kNaN);
  std::vector<double> w_testable;
  std::vector<int> testable_idx;
  for (int i = 0; i < hypotheses.q(); ++i) {
    try {
      TestRecord rec = test_statistic(hypotheses.forms[i], est.model, est.init, obs);
      rec.form_id = i;
      rec.split = SplitId::all;
      out.records[i].first = rec;
      out.records[i].second = rec;
      out.w_rank[i] = side == Side::two_sided ? std::abs(rec.w)
                      : side == Side::greater ? rec.w
                                              : -rec.w;
      w_testable.push_back(rec.w);
      testable_idx.push_back(i);
    } catch (const UntestableForm&) {
      out.records[i].first.form_id = i;
      out.records[i].first.w = kNaN;
      out.records[i].second = out.records[i].first;
      out.untestable.push_back(i);
    }
  }
  for (int local : bh_procedure(w_testable, alpha, side))
    out.rejected.push_back(testable_idx[local]);
  if (hypotheses.truth) {
    const Score s = score(out.rejected, *hypotheses.truth);
    out.fdp = s.fdp;
    out.power = s.power;
  }
  return out;
}

}  // namespace matfdr
