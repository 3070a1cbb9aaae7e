#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "matfdr/csv.hpp"
#include "matfdr/rng.hpp"
#include "matfdr/stats.hpp"
#include "matfdr/version.hpp"
#include "matfdr/whitening.hpp"

namespace matfdr::cli {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_run_record(const std::string& out_dir, const std::string& command,
                      const json& config, std::uint64_t seed) {
  json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["version"] = std::string("matfdr ") + version_string();
  std::ofstream out(join(out_dir, "run.json"));
  if (!out) throw std::runtime_error("cannot write run.json in " + out_dir);
  out << j.dump(2) << '\n';
}

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec && !fs::is_directory(out_dir))
    throw ConfigError("cannot create output directory: " + out_dir);
}

// Shared guard: config problems exit 2, runtime problems exit 3.
template <typename Fn>
int guarded(const CommandArgs& args, Fn&& body) {
  try {
    ensure_out_dir(args.out_dir);
    const json j = load_json(args.config_path);
    return body(j);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

struct ProcedureRun {
  Procedure procedure;
  RejectionResult rejection;
  Eigen::VectorXd w1, w2, w_rank;  // per form
};

ProcedureRun run_procedure(Procedure proc, const ObservationSet& obs,
                           const HypothesisSet& hypotheses, const GdConfig& gd,
                           double alpha, double lambda_scale) {
  ProcedureRun run;
  run.procedure = proc;
  const int q = hypotheses.q();
  run.w1 = Eigen::VectorXd::Constant(q, std::nan(""));
  run.w2 = Eigen::VectorXd::Constant(q, std::nan(""));
  run.w_rank = Eigen::VectorXd::Constant(q, std::nan(""));
  switch (proc) {
    case Procedure::multiply:
    case Procedure::min_abs:
    case Procedure::sum_abs: {
      const Aggregation scheme = proc == Procedure::multiply ? Aggregation::multiply
                                 : proc == Procedure::min_abs ? Aggregation::min_abs
                                                              : Aggregation::sum_abs;
      run.rejection = run_aggregation(obs, hypotheses, gd, scheme, alpha);
      for (int i = 0; i < q; ++i) {
        run.w1(i) = run.rejection.records[i].first.w;
        run.w2(i) = run.rejection.records[i].second.w;
        run.w_rank(i) = run.rejection.w_rank[i];
      }
      break;
    }
    case Procedure::bhq: {
      run.rejection = run_bh_baseline(obs, hypotheses, gd, alpha);
      for (int i = 0; i < q; ++i) {
        run.w1(i) = run.rejection.records[i].first.w;
        run.w2(i) = run.rejection.records[i].first.w;
        run.w_rank(i) = run.rejection.w_rank[i];
      }
      break;
    }
    case Procedure::whiten: {
      WhiteningResult w = run_whitening(obs, hypotheses, gd, alpha, lambda_scale);
      run.w1 = w.w1;
      run.w2 = w.w2;
      run.rejection = std::move(w.rejection);
      for (int i = 0; i < q; ++i) run.w_rank(i) = run.rejection.w_rank[i];
      break;
    }
  }
  return run;
}

std::string fmt(double v) { return csv::format(v); }

}  // namespace

int cmd_simulate(const CommandArgs& args) {
  return guarded(args, [&](const json& j) {
    const SimulateConfig cfg = parse_simulate(j, args.overrides);
    const MetricsTable table = monte_carlo(cfg.scenario, args.overrides.threads);

    csv::Table metrics;
    metrics.header = {"scheme", "signal", "alpha", "mean_fdp", "sd_fdp",
                      "mean_power", "sd_power", "reps"};
    for (const MetricsRow& row : table.rows)
      metrics.rows.push_back({procedure_name(row.procedure), fmt(row.signal),
                              fmt(row.alpha), fmt(row.mean_fdp), fmt(row.sd_fdp),
                              fmt(row.mean_power), fmt(row.sd_power),
                              std::to_string(row.reps)});
    csv::write(join(args.out_dir, "metrics.csv"), metrics);

    if (cfg.scenario.want_roc) {
      csv::Table roc;
      roc.header = {"scheme", "cutoff", "fpr", "tpr"};
      for (const RocPoint& p : table.roc)
        roc.rows.push_back({procedure_name(p.procedure), fmt(p.cutoff), fmt(p.fpr),
                            fmt(p.tpr)});
      csv::write(join(args.out_dir, "roc.csv"), roc);
    }
    write_run_record(args.out_dir, "simulate", to_json(cfg), cfg.scenario.seed);
    if (table.failed_trials > 0) {
      std::cerr << "warning: " << table.failed_trials
                << " trial(s) failed and were excluded";
      if (!table.failure_messages.empty())
        std::cerr << " (first: " << table.failure_messages.front() << ")";
      std::cerr << '\n';
    }
    std::cout << "metrics.csv: " << table.rows.size() << " row(s)\n";
    return kExitOk;
  });
}

int cmd_analyze(const CommandArgs& args) {
  return guarded(args, [&](const json& j) {
    const AnalyzeConfig cfg = parse_analyze(j, args.overrides);
    if (!fs::exists(cfg.dataset_path))
      throw ConfigError("dataset not found: " + cfg.dataset_path);

    RatingsTable table = read_ratings(cfg.dataset_path, cfg.format);
    if (cfg.min_ratings > 0) table = filter_min_ratings(table, cfg.min_ratings);
    if (table.empty()) throw ConfigError("dataset is empty after filtering");

    HypothesisSet hypotheses = adjacent_pair_family(table, cfg.max_q, cfg.side);
    ObservationSet obs = cfg.mask ? random_mask(table, cfg.mask->keep_fraction,
                                                cfg.mask->seed)
                                        .first
                                  : table.to_observations();

    GdConfig gd = cfg.gd;
    gd.rank = cfg.rank;
    gd.seed = cfg.seed;

    csv::Table summary;
    summary.header = {"alpha", "method", "false_discoveries", "true_discoveries",
                      "fdp"};
    bool first_procedure = true;
    for (Procedure proc : cfg.procedures) {
      ProcedureRun run;
      if (hypotheses.q() > 0) {
        run = run_procedure(proc, obs, hypotheses, gd, cfg.alpha, cfg.lambda_scale);
      } else {
        run.procedure = proc;
        run.rejection.fdp = 0.0;
        run.rejection.power = 0.0;
      }

      csv::Table decisions;
      decisions.header = {"form_id", "w1", "w2", "w_rank", "rejected"};
      std::vector<char> rejected_mask(hypotheses.q(), 0);
      for (int idx : run.rejection.rejected) rejected_mask[idx] = 1;
      for (int i = 0; i < hypotheses.q(); ++i)
        decisions.rows.push_back({std::to_string(i), fmt(run.w1(i)), fmt(run.w2(i)),
                                  fmt(run.w_rank(i)),
                                  rejected_mask[i] ? "1" : "0"});
      const std::string decisions_name =
          first_procedure ? "decisions.csv"
                          : "decisions_" + procedure_name(proc) + ".csv";
      csv::write(join(args.out_dir, decisions_name), decisions);
      first_procedure = false;

      int false_rej = 0, true_rej = 0;
      if (hypotheses.truth) {
        for (int idx : run.rejection.rejected)
          ((*hypotheses.truth)[idx] ? true_rej : false_rej) += 1;
      }
      summary.rows.push_back({fmt(cfg.alpha), procedure_name(proc),
                              std::to_string(false_rej), std::to_string(true_rej),
                              fmt(run.rejection.fdp.value_or(0.0))});
    }
    csv::write(join(args.out_dir, "summary.csv"), summary);
    write_run_record(args.out_dir, "analyze", to_json(cfg), cfg.seed);

    std::cout << "q=" << hypotheses.q() << " hypotheses\n";
    for (const auto& row : summary.rows)
      std::cout << row[1] << ": false=" << row[2] << " true=" << row[3]
                << " fdp=" << row[4] << '\n';
    return kExitOk;
  });
}

int cmd_diagnose(const CommandArgs& args) {
  return guarded(args, [&](const json& j) {
    const DiagnoseConfig cfg = parse_diagnose(j, args.overrides);

    const FactorModel model = generate_low_rank(cfg.d1, cfg.d2, cfg.rank,
                                                cfg.lambda_min, cfg.kappa, cfg.seed);
    GdConfig gd = cfg.gd;
    gd.rank = cfg.rank;

    // Null statistics for the requested entry across reps.
    LinearForm form = LinearForm::entry(cfg.entry_row, cfg.entry_col);
    form.set_theta(model.dense(cfg.entry_row, cfg.entry_col));
    std::vector<double> w_samples;
    w_samples.reserve(cfg.reps);
    int failures = 0;
    for (int rep = 0; rep < cfg.reps; ++rep) {
      Rng stream = Rng::stream(cfg.seed, static_cast<std::uint64_t>(rep));
      const ObservationSet obs = sample_observations(
          model, cfg.n, cfg.sigma_xi, cfg.noise, stream.next_u64());
      try {
        const Estimate est = full_estimate(obs, gd);
        w_samples.push_back(
            test_statistic(form, est.model, est.init, obs).w);
      } catch (const UntestableForm&) {
        ++failures;
      }
    }
    if (w_samples.empty()) throw std::runtime_error("all diagnose reps failed");

    {
      csv::Table null_cdf;
      null_cdf.header = {"t", "cdf_diff"};
      std::vector<double> sorted = w_samples;
      std::sort(sorted.begin(), sorted.end());
      const double n = static_cast<double>(sorted.size());
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double empirical = (static_cast<double>(i) + 1.0) / n;
        null_cdf.rows.push_back(
            {fmt(sorted[i]), fmt(empirical - normal_cdf(sorted[i]))});
      }
      csv::write(join(args.out_dir, "null_cdf.csv"), null_cdf);
    }
    {
      csv::Table moments;
      moments.header = {"k", "moment"};
      for (int k : cfg.moment_orders)
        moments.rows.push_back(
            {std::to_string(k), fmt(moment_diagnostic(w_samples, k))});
      csv::write(join(args.out_dir, "moments.csv"), moments);
    }
    {
      FamilyKind kind = cfg.family_kind;
      FamilyParams params = cfg.family;
      if (!cfg.family_given) {
        kind = FamilyKind::submatrix;
        params.row_begin = 0;
        params.row_end = std::min(cfg.d1, 20);
        params.col_begin = 0;
        params.col_end = std::min(cfg.d2, 20);
      }
      const HypothesisSet family = build_family(kind, cfg.d1, cfg.d2, params);
      std::vector<double> grid = cfg.z_grid;
      if (grid.empty())
        for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
      csv::Table dependence;
      dependence.header = {"z", "rho_star"};
      for (double z : grid)
        dependence.rows.push_back(
            {fmt(z), fmt(dependence_diagnostic(family, model.U, model.V, z))});
      csv::write(join(args.out_dir, "dependence.csv"), dependence);
    }
    write_run_record(args.out_dir, "diagnose", to_json(cfg), cfg.seed);
    std::cout << "null_cdf.csv: " << w_samples.size() << " sample(s), "
              << "ks=" << fmt(ks_distance_to_normal(w_samples)) << '\n';
    if (failures > 0)
      std::cerr << "warning: " << failures << " rep(s) untestable, excluded\n";
    return kExitOk;
  });
}

}  // namespace matfdr::cli
