#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vlmfair {

// Exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitDataError = 2,
  kExitInvariantViolation = 3,
};

/// Runs the command line `args` (args[0] is the program name). Diagnostics go
/// to `err`; short human summaries to `out`; payloads only to files.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vlmfair
