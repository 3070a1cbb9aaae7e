#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hypothesis testing of linear forms on noisy low-rank matrices"};
  app.require_subcommand(1);

  matfdr::cli::CommandArgs args;
  std::vector<std::string> schemes;
  bool have_seed = false, have_alpha = false;
  std::uint64_t seed = 0;
  double alpha = 0.0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config file")->required();
    sub->add_option("--out", args.out_dir, "output directory (default .)");
    sub->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { have_seed = true; });
    sub->add_option("--threads", args.overrides.threads,
                    "worker threads (default: logical cores)");
    sub->add_option("--alpha", alpha, "override the FDR level")
        ->each([&](const std::string&) { have_alpha = true; });
    sub->add_option("--scheme", schemes, "override the scheme list")
        ->delimiter(',');
  };

  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo FDR/power sweep");
  CLI::App* analyze = app.add_subcommand("analyze", "test a ratings dataset");
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "null-distribution and dependence reports");
  add_common(simulate);
  add_common(analyze);
  add_common(diagnose);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return matfdr::cli::kExitConfig;
  }

  if (have_seed) args.overrides.seed = seed;
  if (have_alpha) args.overrides.alpha = alpha;
  if (!schemes.empty()) args.overrides.schemes = schemes;

  if (simulate->parsed()) return matfdr::cli::cmd_simulate(args);
  if (analyze->parsed()) return matfdr::cli::cmd_analyze(args);
  if (diagnose->parsed()) return matfdr::cli::cmd_diagnose(args);
  return matfdr::cli::kExitConfig;
}
