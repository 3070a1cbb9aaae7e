#include "run_config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

namespace matfdr::cli {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& context) {
  if (!obj.is_object()) throw ConfigError(context + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key))
      throw ConfigError(context + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

template <typename T>
T get_required(const json& obj, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError("missing required key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

Side parse_side(const std::string& name) {
  if (name == "two_sided") return Side::two_sided;
  if (name == "greater") return Side::greater;
  if (name == "less") return Side::less;
  throw ConfigError("unknown side '" + name + "'");
}

std::string side_name(Side side) {
  switch (side) {
    case Side::two_sided: return "two_sided";
    case Side::greater: return "greater";
    case Side::less: return "less";
  }
  return "two_sided";
}

NoiseSpec parse_noise(const json& obj) {
  require_keys(obj, {"kind", "dof"}, "noise");
  NoiseSpec spec;
  const std::string kind = get_required<std::string>(obj, "kind");
  if (kind == "gaussian") {
    spec.kind = NoiseKind::gaussian;
  } else if (kind == "exponential_centered") {
    spec.kind = NoiseKind::exponential_centered;
  } else if (kind == "student_t") {
    spec.kind = NoiseKind::student_t;
    spec.dof = get_required<int>(obj, "dof");
  } else {
    throw ConfigError("unknown noise kind '" + kind + "'");
  }
  return spec;
}

json noise_to_json(const NoiseSpec& spec) {
  json j;
  switch (spec.kind) {
    case NoiseKind::gaussian: j["kind"] = "gaussian"; break;
    case NoiseKind::exponential_centered: j["kind"] = "exponential_centered"; break;
    case NoiseKind::student_t:
      j["kind"] = "student_t";
      j["dof"] = spec.dof;
      break;
  }
  return j;
}

std::pair<FamilyKind, FamilyParams> parse_family(const json& obj) {
  require_keys(obj, {"kind", "rows", "cols", "groups", "side"}, "family");
  FamilyParams params;
  const std::string kind = get_required<std::string>(obj, "kind");
  FamilyKind family_kind;
  if (kind == "submatrix") family_kind = FamilyKind::submatrix;
  else if (kind == "row_comparison") family_kind = FamilyKind::row_comparison;
  else if (kind == "block_comparison") family_kind = FamilyKind::block_comparison;
  else if (kind == "group_sum") family_kind = FamilyKind::group_sum;
  else throw ConfigError("unknown family kind '" + kind + "'");

  if (obj.contains("rows")) {
    const auto rows = get_required<std::vector<int>>(obj, "rows");
    if (rows.size() != 2) throw ConfigError("family.rows must be [begin, end]");
    params.row_begin = rows[0];
    params.row_end = rows[1];
  }
  if (obj.contains("cols")) {
    const auto cols = get_required<std::vector<int>>(obj, "cols");
    if (cols.size() != 2) throw ConfigError("family.cols must be [begin, end]");
    params.col_begin = cols[0];
    params.col_end = cols[1];
  }
  params.groups = get_or<std::vector<std::vector<int>>>(obj, "groups", {});
  params.side = parse_side(get_or<std::string>(obj, "side", "two_sided"));
  return {family_kind, params};
}

json family_to_json(FamilyKind kind, const FamilyParams& params) {
  json j;
  switch (kind) {
    case FamilyKind::submatrix: j["kind"] = "submatrix"; break;
    case FamilyKind::row_comparison: j["kind"] = "row_comparison"; break;
    case FamilyKind::block_comparison: j["kind"] = "block_comparison"; break;
    case FamilyKind::group_sum: j["kind"] = "group_sum"; break;
  }
  j["rows"] = {params.row_begin, params.row_end};
  j["cols"] = {params.col_begin, params.col_end};
  if (!params.groups.empty()) j["groups"] = params.groups;
  j["side"] = side_name(params.side);
  return j;
}

GdConfig parse_gd(const json& obj) {
  require_keys(obj, {"step_size", "max_iters", "tol"}, "gd");
  GdConfig gd;
  gd.step_size = get_or<double>(obj, "step_size", 0.0);
  gd.max_iters = get_or<int>(obj, "max_iters", 400);
  gd.tol = get_or<double>(obj, "tol", 1e-8);
  return gd;
}

json gd_to_json(const GdConfig& gd) {
  return json{{"step_size", gd.step_size},
              {"max_iters", gd.max_iters},
              {"tol", gd.tol}};
}

std::vector<Procedure> parse_schemes(const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("schemes must be nonempty");
  std::vector<Procedure> out;
  out.reserve(names.size());
  for (const std::string& name : names) {
    try {
      out.push_back(procedure_from_name(name));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

}  // namespace

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

SimulateConfig parse_simulate(const json& j, const Overrides& overrides) {
  require_keys(j, {"d1", "d2", "rank", "lambda_min", "kappa", "n", "noise",
                   "sigma_xi", "family", "signal_prob", "signal_levels", "side",
                   "schemes", "alpha", "reps", "seed", "lambda_scale", "roc", "gd"},
               "simulate config");
  SimulateConfig cfg;
  ScenarioConfig& s = cfg.scenario;
  s.d1 = get_required<int>(j, "d1");
  s.d2 = get_required<int>(j, "d2");
  s.rank = get_required<int>(j, "rank");
  s.lambda_min = get_required<double>(j, "lambda_min");
  s.kappa = get_or<double>(j, "kappa", 1.0);
  s.n = get_required<int>(j, "n");
  if (j.contains("noise")) s.noise = parse_noise(j.at("noise"));
  s.sigma_xi = get_required<double>(j, "sigma_xi");
  if (!j.contains("family")) throw ConfigError("missing required key 'family'");
  std::tie(s.family_kind, s.family) = parse_family(j.at("family"));
  s.side = s.family.side;
  if (j.contains("side")) {
    s.side = parse_side(get_required<std::string>(j, "side"));
    s.family.side = s.side;
  }
  s.signal_prob = get_or<double>(j, "signal_prob", 0.0);
  s.signal_levels = get_or<std::vector<double>>(j, "signal_levels", {0.0});
  s.procedures = parse_schemes(
      get_or<std::vector<std::string>>(j, "schemes", {"multiply"}));
  s.alpha = get_or<double>(j, "alpha", 0.1);
  s.reps = get_required<int>(j, "reps");
  s.seed = get_or<std::uint64_t>(j, "seed", 1);
  s.lambda_scale = get_or<double>(j, "lambda_scale", 1.0);
  s.want_roc = get_or<bool>(j, "roc", false);
  if (j.contains("gd")) s.gd = parse_gd(j.at("gd"));

  if (overrides.seed) s.seed = *overrides.seed;
  if (overrides.alpha) s.alpha = *overrides.alpha;
  if (overrides.schemes) s.procedures = parse_schemes(*overrides.schemes);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

AnalyzeConfig parse_analyze(const json& j, const Overrides& overrides) {
  require_keys(j, {"dataset", "min_ratings", "max_q", "side", "rank", "schemes",
                   "alpha", "seed", "lambda_scale", "mask", "gd"},
               "analyze config");
  AnalyzeConfig cfg;
  if (!j.contains("dataset")) throw ConfigError("missing required key 'dataset'");
  const json& ds = j.at("dataset");
  require_keys(ds, {"path", "format"}, "dataset");
  cfg.dataset_path = get_required<std::string>(ds, "path");
  const std::string format = get_required<std::string>(ds, "format");
  if (format == "tsv_user_item_rating") {
    cfg.format = RatingsFormat::tsv_user_item_rating;
  } else if (format == "csv_wide_matrix") {
    cfg.format = RatingsFormat::csv_wide_matrix;
  } else {
    throw ConfigError("unknown dataset format '" + format + "'");
  }
  cfg.min_ratings = get_or<int>(j, "min_ratings", 0);
  cfg.max_q = get_or<int>(j, "max_q", 1000);
  cfg.side = parse_side(get_or<std::string>(j, "side", "greater"));
  cfg.rank = get_required<int>(j, "rank");
  cfg.procedures = parse_schemes(
      get_or<std::vector<std::string>>(j, "schemes", {"multiply"}));
  cfg.alpha = get_or<double>(j, "alpha", 0.1);
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.lambda_scale = get_or<double>(j, "lambda_scale", 1.0);
  if (j.contains("mask") && !j.at("mask").is_null()) {
    const json& mask = j.at("mask");
    require_keys(mask, {"keep_fraction", "seed"}, "mask");
    MaskSpec spec;
    spec.keep_fraction = get_required<double>(mask, "keep_fraction");
    spec.seed = get_or<std::uint64_t>(mask, "seed", 0);
    cfg.mask = spec;
  }
  if (j.contains("gd")) cfg.gd = parse_gd(j.at("gd"));

  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.alpha) cfg.alpha = *overrides.alpha;
  if (overrides.schemes) cfg.procedures = parse_schemes(*overrides.schemes);
  if (cfg.min_ratings < 0) throw ConfigError("min_ratings must be >= 0");
  if (cfg.max_q < 0) throw ConfigError("max_q must be >= 0");
  if (cfg.rank < 1) throw ConfigError("rank must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw ConfigError("alpha must be in (0,1)");
  return cfg;
}

DiagnoseConfig parse_diagnose(const json& j, const Overrides& overrides) {
  require_keys(j, {"d1", "d2", "rank", "lambda_min", "kappa", "n", "sigma_xi",
                   "noise", "reps", "seed", "entry", "moment_orders", "z_grid",
                   "family", "gd"},
               "diagnose config");
  DiagnoseConfig cfg;
  cfg.d1 = get_required<int>(j, "d1");
  cfg.d2 = get_required<int>(j, "d2");
  cfg.rank = get_required<int>(j, "rank");
  cfg.lambda_min = get_required<double>(j, "lambda_min");
  cfg.kappa = get_or<double>(j, "kappa", 1.0);
  cfg.n = get_required<int>(j, "n");
  cfg.sigma_xi = get_required<double>(j, "sigma_xi");
  if (j.contains("noise")) cfg.noise = parse_noise(j.at("noise"));
  cfg.reps = get_required<int>(j, "reps");
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  if (j.contains("entry")) {
    const auto entry = get_required<std::vector<int>>(j, "entry");
    if (entry.size() != 2) throw ConfigError("entry must be [row, col]");
    cfg.entry_row = entry[0];
    cfg.entry_col = entry[1];
  }
  cfg.moment_orders = get_or<std::vector<int>>(j, "moment_orders", {2, 3, 4});
  cfg.z_grid = get_or<std::vector<double>>(j, "z_grid", {});
  if (j.contains("family")) {
    std::tie(cfg.family_kind, cfg.family) = parse_family(j.at("family"));
    cfg.family_given = true;
  }
  if (j.contains("gd")) cfg.gd = parse_gd(j.at("gd"));

  if (overrides.seed) cfg.seed = *overrides.seed;
  if (cfg.reps < 1) throw ConfigError("reps must be >= 1");
  if (cfg.d1 < 1 || cfg.d2 < 1 || cfg.rank < 1)
    throw ConfigError("bad diagnose dimensions");
  if (cfg.entry_row < 0 || cfg.entry_row >= cfg.d1 || cfg.entry_col < 0 ||
      cfg.entry_col >= cfg.d2)
    throw ConfigError("entry outside dimensions");
  for (int k : cfg.moment_orders)
    if (k < 2) throw ConfigError("moment orders must be >= 2");
  for (double z : cfg.z_grid)
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("z_grid values must be in (0,1)");
  return cfg;
}

json to_json(const SimulateConfig& c) {
  const ScenarioConfig& s = c.scenario;
  json j;
  j["d1"] = s.d1;
  j["d2"] = s.d2;
  j["rank"] = s.rank;
  j["lambda_min"] = s.lambda_min;
  j["kappa"] = s.kappa;
  j["n"] = s.n;
  j["noise"] = noise_to_json(s.noise);
  j["sigma_xi"] = s.sigma_xi;
  j["family"] = family_to_json(s.family_kind, s.family);
  j["signal_prob"] = s.signal_prob;
  j["signal_levels"] = s.signal_levels;
  j["side"] = side_name(s.side);
  std::vector<std::string> names;
  for (Procedure p : s.procedures) names.push_back(procedure_name(p));
  j["schemes"] = names;
  j["alpha"] = s.alpha;
  j["reps"] = s.reps;
  j["seed"] = s.seed;
  j["lambda_scale"] = s.lambda_scale;
  j["roc"] = s.want_roc;
  j["gd"] = gd_to_json(s.gd);
  return j;
}

json to_json(const AnalyzeConfig& c) {
  json j;
  j["dataset"] = {{"path", c.dataset_path},
                  {"format", c.format == RatingsFormat::tsv_user_item_rating
                                 ? "tsv_user_item_rating"
                                 : "csv_wide_matrix"}};
  j["min_ratings"] = c.min_ratings;
  j["max_q"] = c.max_q;
  j["side"] = side_name(c.side);
  j["rank"] = c.rank;
  std::vector<std::string> names;
  for (Procedure p : c.procedures) names.push_back(procedure_name(p));
  j["schemes"] = names;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["lambda_scale"] = c.lambda_scale;
  if (c.mask)
    j["mask"] = {{"keep_fraction", c.mask->keep_fraction}, {"seed", c.mask->seed}};
  j["gd"] = gd_to_json(c.gd);
  return j;
}

json to_json(const DiagnoseConfig& c) {
  json j;
  j["d1"] = c.d1;
  j["d2"] = c.d2;
  j["rank"] = c.rank;
  j["lambda_min"] = c.lambda_min;
  j["kappa"] = c.kappa;
  j["n"] = c.n;
  j["sigma_xi"] = c.sigma_xi;
  j["noise"] = noise_to_json(c.noise);
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["entry"] = {c.entry_row, c.entry_col};
  j["moment_orders"] = c.moment_orders;
  if (!c.z_grid.empty()) j["z_grid"] = c.z_grid;
  if (c.family_given) j["family"] = family_to_json(c.family_kind, c.family);
  j["gd"] = gd_to_json(c.gd);
  return j;
}

}  // namespace matfdr::cli
