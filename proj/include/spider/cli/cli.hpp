#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spider::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitGradcheckFailed = 1,
  kExitParseError = 2,
  kExitPlannerMiss = 3,
  kExitUsage = 64,
  kExitRuntime = 70,
};

/// Runs one command line. `args` excludes the program name. Structured
/// results go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spider::cli
