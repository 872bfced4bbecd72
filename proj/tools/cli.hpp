#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace meshvote::cli {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kInputError = 2,
  kBackendError = 3,
  kInternalError = 4,
};

/// Runs `meshvote <args...>` (without the program name) and returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace meshvote::cli
