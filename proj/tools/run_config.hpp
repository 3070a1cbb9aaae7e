#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>

#include "matfdr/ingest.hpp"
#include "matfdr/simulate.hpp"

// JSON-config plumbing for the command-line tool. Configs are strict: every
// key must be known, so a typo fails fast instead of silently defaulting.
namespace matfdr::cli {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Flag-level overrides; flags win over config values.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::vector<std::string>> schemes;
  int threads = 0;
};

struct SimulateConfig {
  ScenarioConfig scenario;
};

struct MaskSpec {
  double keep_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct AnalyzeConfig {
  std::string dataset_path;
  RatingsFormat format = RatingsFormat::tsv_user_item_rating;
  int min_ratings = 0;
  int max_q = 1000;
  Side side = Side::greater;
  int rank = 1;
  std::vector<Procedure> procedures = {Procedure::multiply};
  double alpha = 0.1;
  std::uint64_t seed = 1;
  double lambda_scale = 1.0;
  std::optional<MaskSpec> mask;
  GdConfig gd;
};

struct DiagnoseConfig {
  int d1 = 0, d2 = 0, rank = 1;
  double lambda_min = 1.0, kappa = 1.0;
  int n = 0;
  double sigma_xi = 1.0;
  NoiseSpec noise;
  int reps = 0;
  std::uint64_t seed = 1;
  int entry_row = 0, entry_col = 0;
  std::vector<int> moment_orders = {2, 3, 4};
  std::vector<double> z_grid;  // defaults to 0.05..0.95 when empty
  FamilyKind family_kind = FamilyKind::submatrix;
  FamilyParams family;
  bool family_given = false;
  GdConfig gd;
};

nlohmann::json load_json(const std::string& path);

SimulateConfig parse_simulate(const nlohmann::json& j, const Overrides& overrides);
AnalyzeConfig parse_analyze(const nlohmann::json& j, const Overrides& overrides);
DiagnoseConfig parse_diagnose(const nlohmann::json& j, const Overrides& overrides);

nlohmann::json to_json(const SimulateConfig& c);
nlohmann::json to_json(const AnalyzeConfig& c);
nlohmann::json to_json(const DiagnoseConfig& c);

}  // namespace matfdr::cli
