#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace salm::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kSuccess = 0,
  kInputError = 1,    ///< validation, configuration, missing or corrupt input
  kRuntimeError = 2,  ///< anything else
};

/// Runs `salm <subcommand> ...`. Human output goes to `out` (or a JSON
/// summary with --json); diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with argv[0] supplied.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace salm::cli
