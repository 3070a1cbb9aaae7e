#include "doctest.h"

#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "matfdr/csv.hpp"
#include "matfdr/rng.hpp"
#include "matfdr/simulate.hpp"
#include "matfdr/stats.hpp"

using namespace matfdr;
using namespace matfdr::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("matfdr_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSimulateConfig = R"({
  "d1": 24, "d2": 24, "rank": 2, "lambda_min": 24.0, "kappa": 1.5,
  "n": 960, "noise": {"kind": "gaussian"}, "sigma_xi": 0.5,
  "family": {"kind": "submatrix", "rows": [0, 5], "cols": [0, 5]},
  "signal_prob": 0.25, "signal_levels": [1.2], "side": "two_sided",
  "schemes": ["multiply", "bhq"], "alpha": 0.1, "reps": 2, "seed": 13,
  "roc": true
})";

const char* kDiagnoseConfig = R"({
  "d1": 20, "d2": 20, "rank": 2, "lambda_min": 20.0, "kappa": 1.5,
  "n": 800, "sigma_xi": 0.5, "reps": 40, "seed": 3, "entry": [2, 3],
  "moment_orders": [2, 3]
})";

}  // namespace

TEST_CASE("simulate command") {
  TempDir tmp;
  write_file(tmp.file("sim.json"), kSimulateConfig);
  CommandArgs args;
  args.config_path = tmp.file("sim.json");
  args.out_dir = tmp.file("out");

  SUBCASE("writes metrics, roc and a run record") {
    REQUIRE(cmd_simulate(args) == kExitOk);
    const csv::Table metrics = csv::read(tmp.file("out/metrics.csv"));
    CHECK(metrics.header ==
          std::vector<std::string>{"scheme", "signal", "alpha", "mean_fdp",
                                   "sd_fdp", "mean_power", "sd_power", "reps"});
    CHECK(metrics.rows.size() == 2);  // one per (scheme, signal)
    const csv::Table roc = csv::read(tmp.file("out/roc.csv"));
    CHECK(roc.header ==
          std::vector<std::string>{"scheme", "cutoff", "fpr", "tpr"});
    CHECK(roc.rows.size() > 0);
    CHECK(fs::exists(tmp.file("out/run.json")));
  }
  SUBCASE("re-running reproduces the outputs byte for byte") {
    REQUIRE(cmd_simulate(args) == kExitOk);
    const std::string first = slurp(tmp.file("out/metrics.csv"));
    const std::string first_roc = slurp(tmp.file("out/roc.csv"));
    REQUIRE(cmd_simulate(args) == kExitOk);
    CHECK(slurp(tmp.file("out/metrics.csv")) == first);
    CHECK(slurp(tmp.file("out/roc.csv")) == first_roc);
  }
  SUBCASE("unknown keys are a config error") {
    write_file(tmp.file("bad.json"),
               R"({"d1": 4, "d2": 4, "rank": 1, "lambda_min": 1.0, "n": 10,
                   "sigma_xi": 0.1, "reps": 1, "typo_key": 3,
                   "family": {"kind": "submatrix", "rows": [0,2], "cols": [0,2]}})");
    args.config_path = tmp.file("bad.json");
    CHECK(cmd_simulate(args) == kExitConfig);
  }
  SUBCASE("roc with several signal levels is a config error") {
    std::string cfg = kSimulateConfig;
    const auto pos = cfg.find("[1.2]");
    cfg.replace(pos, 5, "[1.2, 2.0]");
    write_file(tmp.file("two.json"), cfg);
    args.config_path = tmp.file("two.json");
    CHECK(cmd_simulate(args) == kExitConfig);
  }
  SUBCASE("missing config file is a config error") {
    args.config_path = tmp.file("nope.json");
    CHECK(cmd_simulate(args) == kExitConfig);
  }
  SUBCASE("scheme override changes the emitted rows") {
    args.overrides.schemes = std::vector<std::string>{"min_abs"};
    REQUIRE(cmd_simulate(args) == kExitOk);
    const csv::Table metrics = csv::read(tmp.file("out/metrics.csv"));
    REQUIRE(metrics.rows.size() == 1);
    CHECK(metrics.rows[0][0] == "min_abs");
  }
}

TEST_CASE("analyze command") {
  TempDir tmp;
  std::string body;
  Rng rng(17);
  for (int u = 0; u < 30; ++u)
    for (int j = 0; j < 12; ++j)
      if (rng.bernoulli(0.8))
        body += "u" + std::to_string(u) + "\tm" + std::to_string(j) + "\t" +
                std::to_string(1 + static_cast<int>(rng.below(5))) + "\n";
  write_file(tmp.file("ratings.tsv"), body);

  const std::string config = std::string(R"({
    "dataset": {"path": ")") + tmp.file("ratings.tsv") + R"(",
                "format": "tsv_user_item_rating"},
    "min_ratings": 2, "max_q": 40, "side": "greater", "rank": 2,
    "schemes": ["multiply", "bhq"], "alpha": 0.2, "seed": 7
  })";
  write_file(tmp.file("an.json"), config);
  CommandArgs args;
  args.config_path = tmp.file("an.json");
  args.out_dir = tmp.file("out");

  SUBCASE("end-to-end produces decisions and a summary") {
    REQUIRE(cmd_analyze(args) == kExitOk);
    const csv::Table decisions = csv::read(tmp.file("out/decisions.csv"));
    CHECK(decisions.header == std::vector<std::string>{"form_id", "w1", "w2",
                                                       "w_rank", "rejected"});
    CHECK(decisions.rows.size() == 40);
    CHECK(fs::exists(tmp.file("out/decisions_bhq.csv")));
    const csv::Table summary = csv::read(tmp.file("out/summary.csv"));
    CHECK(summary.header ==
          std::vector<std::string>{"alpha", "method", "false_discoveries",
                                   "true_discoveries", "fdp"});
    CHECK(summary.rows.size() == 2);
    // The fdp column is consistent with the discovery counts.
    for (const auto& row : summary.rows) {
      const double fd = std::stod(row[2]);
      const double td = std::stod(row[3]);
      const double fdp = std::stod(row[4]);
      const double denom = std::max(1.0, fd + td);
      CHECK(fdp == doctest::Approx(fd / denom).epsilon(1e-9));
    }
  }
  SUBCASE("an empty family still succeeds with an empty decisions file") {
    write_file(tmp.file("sparse.tsv"), "a\ti1\t3\nb\ti2\t4\n");
    std::string cfg = std::string(R"({
      "dataset": {"path": ")") + tmp.file("sparse.tsv") + R"(",
                  "format": "tsv_user_item_rating"},
      "rank": 1, "schemes": ["multiply"]
    })";
    write_file(tmp.file("an2.json"), cfg);
    args.config_path = tmp.file("an2.json");
    REQUIRE(cmd_analyze(args) == kExitOk);
    CHECK(csv::read(tmp.file("out/decisions.csv")).rows.empty());
  }
  SUBCASE("missing dataset is a config error") {
    std::string cfg = R"({
      "dataset": {"path": "/nonexistent/r.tsv",
                  "format": "tsv_user_item_rating"},
      "rank": 1
    })";
    write_file(tmp.file("an3.json"), cfg);
    args.config_path = tmp.file("an3.json");
    CHECK(cmd_analyze(args) == kExitConfig);
  }
}

TEST_CASE("diagnose command") {
  TempDir tmp;
  write_file(tmp.file("diag.json"), kDiagnoseConfig);
  CommandArgs args;
  args.config_path = tmp.file("diag.json");
  args.out_dir = tmp.file("out");

  SUBCASE("produces the three reports with their declared headers") {
    REQUIRE(cmd_diagnose(args) == kExitOk);
    CHECK(csv::read(tmp.file("out/null_cdf.csv")).header ==
          std::vector<std::string>{"t", "cdf_diff"});
    CHECK(csv::read(tmp.file("out/dependence.csv")).header ==
          std::vector<std::string>{"z", "rho_star"});
    const csv::Table moments = csv::read(tmp.file("out/moments.csv"));
    CHECK(moments.header == std::vector<std::string>{"k", "moment"});
    CHECK(moments.rows.size() == 2);
  }
  SUBCASE("the emitted cdf differences reproduce the KS statistic") {
    REQUIRE(cmd_diagnose(args) == kExitOk);
    const csv::Table cdf = csv::read(tmp.file("out/null_cdf.csv"));
    const double n = static_cast<double>(cdf.rows.size());
    double ks_from_file = 0.0;
    for (const auto& row : cdf.rows) {
      const double diff = std::stod(row[1]);
      ks_from_file = std::max(ks_from_file, std::max(diff, 1.0 / n - diff));
    }

    // Reproduce the sampling loop (same seed derivation) independently.
    const FactorModel m = generate_low_rank(20, 20, 2, 20.0, 1.5, 3);
    LinearForm form = LinearForm::entry(2, 3);
    form.set_theta(m.dense(2, 3));
    std::vector<double> w;
    for (int rep = 0; rep < 40; ++rep) {
      Rng stream = Rng::stream(3, rep);
      const ObservationSet obs =
          sample_observations(m, 800, 0.5, NoiseSpec{}, stream.next_u64());
      GdConfig cfg;
      cfg.rank = 2;
      const Estimate est = full_estimate(obs, cfg);
      w.push_back(test_statistic(form, est.model, est.init, obs).w);
    }
    CHECK(ks_from_file ==
          doctest::Approx(ks_distance_to_normal(w)).epsilon(1e-9));
  }
  SUBCASE("zero reps is a config error") {
    std::string cfg = kDiagnoseConfig;
    const auto pos = cfg.find("\"reps\": 40");
    cfg.replace(pos, 10, "\"reps\": 0");
    write_file(tmp.file("zero.json"), cfg);
    args.config_path = tmp.file("zero.json");
    CHECK(cmd_diagnose(args) == kExitConfig);
  }
}
