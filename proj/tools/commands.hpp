#pragma once

#include <string>

#include "run_config.hpp"

namespace matfdr::cli {

// Exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct CommandArgs {
  std::string config_path;
  std::string out_dir = ".";
  Overrides overrides;
};

int cmd_simulate(const CommandArgs& args);
int cmd_analyze(const CommandArgs& args);
int cmd_diagnose(const CommandArgs& args);

}  // namespace matfdr::cli
