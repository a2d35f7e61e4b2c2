#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fuzzclear {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitSolver = 2,
  kExitUsage = 64,
};

/// Subcommands: plan, simulate, fuzzy-eval, validate. `args` excludes the
/// program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Tries `name`, `name.json` and `scenarios/name.json` in that order.
std::string resolve_scenario_path(const std::string& name);

}  // namespace fuzzclear
