#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace locathe::cli {

/// Stable exit codes.
enum Exit : int {
  kOk = 0,
  /// Usage errors, and attack runs whose verdict differs from the catalog.
  kFailure = 1,
  kAlreadyRegistered = 2,
  kIo = 3,
  kHandshakeFailed = 4,
  kUnknownScenario = 5,
};

/// Runs one command line; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace locathe::cli
