#include "matfdr/simulate.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "matfdr/parallel.hpp"
#include "matfdr/rng.hpp"
#include "matfdr/stats.hpp"

namespace matfdr {

void NoiseSpec::validate() const {
  if (kind == NoiseKind::student_t && dof <= 2)
    throw std::invalid_argument("NoiseSpec: student_t needs dof > 2");
}

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  // Fix the QR sign ambiguity so the factors are a pure function of m.
  for (int k = 0; k < q.cols(); ++k)
    if (qr.matrixQR()(k, k) < 0.0) q.col(k) = -q.col(k);
  return q;
}

}  // namespace

FactorModel generate_low_rank(int d1, int d2, int rank, double lambda_min,
                              double kappa, std::uint64_t seed) {
  if (rank < 1 || rank > std::min(d1, d2))
    throw std::invalid_argument("generate_low_rank: bad rank");
  if (!(lambda_min > 0.0) || !(kappa >= 1.0))
    throw std::invalid_argument("generate_low_rank: need lambda_min > 0, kappa >= 1");
  Rng rng(seed);
  FactorModel m;
  m.U = orthonormalize(gaussian_matrix(d1, rank, rng));
  m.V = orthonormalize(gaussian_matrix(d2, rank, rng));
  m.S = Eigen::VectorXd(rank);
  if (rank == 1) {
    m.S(0) = lambda_min;
  } else {
    const double top = kappa * lambda_min;
    for (int i = 0; i < rank; ++i)
      m.S(i) = top - (top - lambda_min) * static_cast<double>(i) /
                         static_cast<double>(rank - 1);
  }
  m.dense = m.reconstruct();
  return m;
}

ObservationSet sample_observations(const FactorModel& model, int n, double sigma_xi,
                                   const NoiseSpec& noise, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_observations: n must be >= 1");
  if (sigma_xi < 0.0)
    throw std::invalid_argument("sample_observations: sigma_xi must be >= 0");
  noise.validate();
  if (!model.has_dense())
    throw std::invalid_argument("sample_observations: model.dense required");
  const int d1 = static_cast<int>(model.dense.rows());
  const int d2 = static_cast<int>(model.dense.cols());

  Rng rng(seed);
  ObservationSet obs{d1, d2, {}};
  obs.samples.reserve(n);
  const double t_scale =
      noise.kind == NoiseKind::student_t
          ? std::sqrt(static_cast<double>(noise.dof - 2) /
                      static_cast<double>(noise.dof))
          : 0.0;
  for (int s = 0; s < n; ++s) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(d1)));
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(d2)));
    double xi = 0.0;
    if (sigma_xi > 0.0) {
      switch (noise.kind) {
        case NoiseKind::gaussian:
          xi = rng.normal(0.0, sigma_xi);
          break;
        case NoiseKind::exponential_centered:
          xi = rng.exponential(sigma_xi) - sigma_xi;
          break;
        case NoiseKind::student_t:
          xi = sigma_xi * t_scale * rng.student_t(noise.dof);
          break;
      }
    }
    obs.samples.push_back({i, j, model.dense(i, j) + xi});
  }
  return obs;
}

SignalAssignment assign_signals(const HypothesisSet& hypotheses,
                                const FactorModel& model, double p, double mu,
                                std::uint64_t seed, Side side) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("assign_signals: p must be in [0,1]");
  if (mu < 0.0) throw std::invalid_argument("assign_signals: mu must be >= 0");
  const Eigen::MatrixXd dense =
      model.has_dense() ? model.dense : model.reconstruct();
  Rng rng(seed);
  SignalAssignment out;
  out.thetas.reserve(hypotheses.forms.size());
  out.truth.reserve(hypotheses.forms.size());
  for (const LinearForm& form : hypotheses.forms) {
    const double truth_value = form.inner(dense);
    const bool signal = rng.bernoulli(p);
    if (!signal) {
      out.thetas.push_back(truth_value);
      out.truth.push_back(false);
      continue;
    }
    double magnitude = mu * (0.5 + rng.uniform01());
    double sign = 1.0;
    switch (side) {
      case Side::two_sided:
        sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        break;
      case Side::greater:  // <M,T> - theta = mu_T > 0
        sign = 1.0;
        break;
      case Side::less:
        sign = -1.0;
        break;
    }
    out.thetas.push_back(truth_value - sign * magnitude);
    out.truth.push_back(true);
  }
  return out;
}

void apply_assignment(HypothesisSet& hypotheses, const SignalAssignment& assignment) {
  if (assignment.thetas.size() != hypotheses.forms.size())
    throw std::invalid_argument("apply_assignment: size mismatch");
  for (std::size_t i = 0; i < assignment.thetas.size(); ++i)
    hypotheses.forms[i].set_theta(assignment.thetas[i]);
  hypotheses.truth = assignment.truth;
}

HypothesisSet build_family(FamilyKind kind, int d1, int d2,
                           const FamilyParams& params) {
  HypothesisSet set;
  const auto check_range = [&](int rb, int re, int cb, int ce) {
    if (rb < 0 || cb < 0 || re > d1 || ce > d2 || rb >= re || cb >= ce)
      throw std::invalid_argument("build_family: range outside dimensions");
  };
  switch (kind) {
    case FamilyKind::submatrix:
      check_range(params.row_begin, params.row_end, params.col_begin, params.col_end);
      for (int i = params.row_begin; i < params.row_end; ++i)
        for (int j = params.col_begin; j < params.col_end; ++j)
          set.forms.push_back(LinearForm::entry(i, j, 0.0, params.side));
      break;
    case FamilyKind::row_comparison:
      check_range(params.row_begin, params.row_end + 1, params.col_begin,
                  params.col_end);
      for (int i = params.row_begin; i < params.row_end; ++i)
        for (int j = params.col_begin; j < params.col_end; ++j)
          set.forms.push_back(
              LinearForm::entry_difference(i, j, i + 1, j, 0.0, params.side));
      break;
    case FamilyKind::block_comparison:
      check_range(params.row_begin, params.row_end, params.col_begin, params.col_end);
      for (int i = params.row_begin; i < params.row_end; ++i)
        for (int j = params.col_begin; j < params.col_end; ++j) {
          if (i == 0 && j == 0) continue;  // anchor cell compared against
          set.forms.push_back(
              LinearForm::entry_difference(i, j, 0, 0, 0.0, params.side));
        }
      break;
    case FamilyKind::group_sum: {
      check_range(0, d1, params.col_begin, params.col_end);
      if (params.groups.empty())
        throw std::invalid_argument("build_family: group_sum needs groups");
      std::set<int> seen;
      for (const auto& group : params.groups) {
        if (group.empty())
          throw std::invalid_argument("build_family: empty group");
        for (int i : group) {
          if (i < 0 || i >= d1)
            throw std::invalid_argument("build_family: group row out of range");
          if (!seen.insert(i).second)
            throw std::invalid_argument("build_family: overlapping groups");
        }
      }
      for (const auto& group : params.groups) {
        for (int j = params.col_begin; j < params.col_end; ++j) {
          std::vector<FormEntry> entries;
          entries.reserve(group.size());
          for (int i : group) entries.push_back({i, j, 1.0});
          set.forms.emplace_back(std::move(entries), 0.0, params.side);
        }
      }
      break;
    }
  }
  return set;
}

double dependence_diagnostic(const HypothesisSet& hypotheses,
                             const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                             double z) {
  if (!(z > 0.0 && z < 1.0))
    throw std::invalid_argument("dependence_diagnostic: z must be in (0,1)");
  const int q = hypotheses.q();
  if (q == 0) throw std::invalid_argument("dependence_diagnostic: empty family");
  std::vector<TangentSummary> summaries;
  summaries.reserve(q);
  for (const LinearForm& f : hypotheses.forms)
    summaries.push_back(summarize_projection(f, u, v));
  long long related = 0;
  for (int i = 0; i < q; ++i) {
    if (!(summaries[i].norm2 > 0.0)) continue;  // degenerate form: no pairs
    ++related;                                  // the diagonal pair, |rho| = 1
    for (int j = i + 1; j < q; ++j) {
      if (!(summaries[j].norm2 > 0.0)) continue;
      const double rho = projection_inner(summaries[i], summaries[j]) /
                         std::sqrt(summaries[i].norm2 * summaries[j].norm2);
      if (std::abs(rho) > z) related += 2;
    }
  }
  return static_cast<double>(related) /
         (static_cast<double>(q) * static_cast<double>(q));
}

std::string procedure_name(Procedure p) {
  switch (p) {
    case Procedure::multiply: return "multiply";
    case Procedure::min_abs: return "min_abs";
    case Procedure::sum_abs: return "sum_abs";
    case Procedure::bhq: return "bhq";
    case Procedure::whiten: return "whiten";
  }
  return "unknown";
}

Procedure procedure_from_name(const std::string& name) {
  if (name == "multiply") return Procedure::multiply;
  if (name == "min_abs") return Procedure::min_abs;
  if (name == "sum_abs") return Procedure::sum_abs;
  if (name == "bhq") return Procedure::bhq;
  if (name == "whiten") return Procedure::whiten;
  throw std::invalid_argument("unknown procedure: " + name);
}

void ScenarioConfig::validate() const {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("scenario: bad dimensions");
  if (rank < 1 || rank > std::min(d1, d2))
    throw std::invalid_argument("scenario: bad rank");
  if (!(lambda_min > 0.0) || !(kappa >= 1.0))
    throw std::invalid_argument("scenario: bad spectrum");
  if (n < 2) throw std::invalid_argument("scenario: n must be >= 2");
  noise.validate();
  if (sigma_xi < 0.0) throw std::invalid_argument("scenario: bad sigma_xi");
  if (!(signal_prob >= 0.0 && signal_prob <= 1.0))
    throw std::invalid_argument("scenario: signal_prob must be in [0,1]");
  if (signal_levels.empty())
    throw std::invalid_argument("scenario: signal_levels must be nonempty");
  for (double mu : signal_levels)
    if (mu < 0.0) throw std::invalid_argument("scenario: negative signal level");
  if (procedures.empty())
    throw std::invalid_argument("scenario: procedures must be nonempty");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("scenario: alpha must be in (0,1)");
  if (reps < 1) throw std::invalid_argument("scenario: reps must be >= 1");
  if (want_roc && signal_levels.size() != 1)
    throw std::invalid_argument("scenario: roc output needs one signal level");
}

namespace {

struct TrialOutcome {
  bool failed = false;
  std::string message;
  // Indexed like config.procedures.
  std::vector<double> fdp, power;
  std::vector<std::vector<std::pair<double, bool>>> scores;  // (score, is_signal)
};

double bh_score(const TestRecord& rec, Side side) {
  switch (side) {
    case Side::two_sided: return std::abs(rec.w);
    case Side::greater: return rec.w;
    case Side::less: return -rec.w;
  }
  return std::abs(rec.w);
}

TrialOutcome run_trial(const ScenarioConfig& config, double mu,
                       std::uint64_t stream_index, bool want_scores) {
  TrialOutcome out;
  Rng stream = Rng::stream(config.seed, stream_index);
  const std::uint64_t model_seed = stream.next_u64();
  const std::uint64_t signal_seed = stream.next_u64();
  const std::uint64_t obs_seed = stream.next_u64();
  const std::uint64_t split_seed = stream.next_u64();

  try {
    const FactorModel model = generate_low_rank(config.d1, config.d2, config.rank,
                                                config.lambda_min, config.kappa,
                                                model_seed);
    HypothesisSet hypotheses =
        build_family(config.family_kind, config.d1, config.d2, config.family);
    apply_assignment(hypotheses, assign_signals(hypotheses, model,
                                                config.signal_prob, mu,
                                                signal_seed, config.side));
    const ObservationSet obs = sample_observations(model, config.n, config.sigma_xi,
                                                   config.noise, obs_seed);
    GdConfig gd = config.gd;
    gd.rank = config.rank;
    gd.seed = split_seed;

    const bool needs_splits =
        std::any_of(config.procedures.begin(), config.procedures.end(),
                    [](Procedure p) { return p != Procedure::bhq; });
    SplitStatistics stats;
    if (needs_splits) stats = compute_split_statistics(obs, hypotheses, gd);

    for (Procedure proc : config.procedures) {
      RejectionResult res;
      switch (proc) {
        case Procedure::multiply:
          res = finish_aggregation(stats, hypotheses, Aggregation::multiply,
                                   config.alpha, config.side);
          break;
        case Procedure::min_abs:
          res = finish_aggregation(stats, hypotheses, Aggregation::min_abs,
                                   config.alpha, config.side);
          break;
        case Procedure::sum_abs:
          res = finish_aggregation(stats, hypotheses, Aggregation::sum_abs,
                                   config.alpha, config.side);
          break;
        case Procedure::bhq:
          res = run_bh_baseline(obs, hypotheses, gd, config.alpha);
          break;
        case Procedure::whiten:
          res = finish_whitening(stats, hypotheses, config.rank, config.alpha,
                                 config.lambda_scale, config.side)
                    .rejection;
          break;
      }
      out.fdp.push_back(res.fdp.value_or(0.0));
      out.power.push_back(res.power.value_or(0.0));
      if (want_scores) {
        std::vector<std::pair<double, bool>> scored;
        const std::vector<bool>& truth = *hypotheses.truth;
        for (int i = 0; i < hypotheses.q(); ++i) {
          double s;
          if (proc == Procedure::bhq) {
            if (std::isnan(res.records[i].first.w)) continue;
            s = bh_score(res.records[i].first, config.side);
          } else {
            if (std::isnan(res.w_rank[i])) continue;
            s = res.w_rank[i];
          }
          scored.emplace_back(s, truth[i]);
        }
        out.scores.push_back(std::move(scored));
      }
    }
  } catch (const std::exception& err) {
    out.failed = true;
    out.message = err.what();
  }
  return out;
}

std::vector<RocPoint> roc_curve(Procedure proc, double signal,
                                std::vector<std::pair<double, bool>> scored) {
  std::vector<RocPoint> curve;
  if (scored.empty()) return curve;
  long positives = 0, negatives = 0;
  for (const auto& [s, truth] : scored) (truth ? positives : negatives) += 1;
  if (positives == 0 || negatives == 0) return curve;
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < scored.size()) {
    const double cutoff = scored[i].first;
    for (; i < scored.size() && scored[i].first >= cutoff; ++i)
      (scored[i].second ? tp : fp) += 1;
    curve.push_back({proc, signal, cutoff,
                     static_cast<double>(fp) / static_cast<double>(negatives),
                     static_cast<double>(tp) / static_cast<double>(positives)});
  }
  // Thin very long curves to keep the emitted table manageable.
  constexpr std::size_t kMaxPoints = 512;
  if (curve.size() > kMaxPoints) {
    std::vector<RocPoint> thin;
    thin.reserve(kMaxPoints);
    const double stride =
        static_cast<double>(curve.size() - 1) / static_cast<double>(kMaxPoints - 1);
    for (std::size_t k = 0; k < kMaxPoints; ++k)
      thin.push_back(curve[static_cast<std::size_t>(stride * static_cast<double>(k))]);
    curve = std::move(thin);
  }
  return curve;
}

}  // namespace

MetricsTable monte_carlo(const ScenarioConfig& config, int threads) {
  config.validate();
  MetricsTable table;
  const int levels = static_cast<int>(config.signal_levels.size());
  const int total = levels * config.reps;
  std::vector<TrialOutcome> outcomes(total);

  parallel_for(total, threads, [&](int idx) {
    const int level = idx / config.reps;
    outcomes[idx] = run_trial(config, config.signal_levels[level],
                              static_cast<std::uint64_t>(idx), config.want_roc);
  });

  for (int level = 0; level < levels; ++level) {
    const double mu = config.signal_levels[level];
    for (std::size_t p = 0; p < config.procedures.size(); ++p) {
      std::vector<double> fdps, powers;
      std::vector<std::pair<double, bool>> pooled;
      for (int rep = 0; rep < config.reps; ++rep) {
        const TrialOutcome& t = outcomes[level * config.reps + rep];
        if (t.failed) continue;
        fdps.push_back(t.fdp[p]);
        powers.push_back(t.power[p]);
        if (config.want_roc)
          pooled.insert(pooled.end(), t.scores[p].begin(), t.scores[p].end());
      }
      MetricsRow row;
      row.procedure = config.procedures[p];
      row.signal = mu;
      row.alpha = config.alpha;
      row.reps = static_cast<int>(fdps.size());
      if (!fdps.empty()) {
        row.mean_fdp = mean(fdps);
        row.sd_fdp = sample_sd(fdps);
        row.mean_power = mean(powers);
        row.sd_power = sample_sd(powers);
      }
      table.rows.push_back(row);
      if (config.want_roc) {
        const auto curve = roc_curve(config.procedures[p], mu, std::move(pooled));
        table.roc.insert(table.roc.end(), curve.begin(), curve.end());
      }
    }
  }
  for (const TrialOutcome& t : outcomes) {
    if (t.failed) {
      ++table.failed_trials;
      if (table.failure_messages.size() < 5)
        table.failure_messages.push_back(t.message);
    }
  }
  return table;
}

}  // namespace matfdr
