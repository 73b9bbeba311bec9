#ifndef SENTINEL_CLI_HPP
#define SENTINEL_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace sentinel::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsageError = 2 };

struct CommandOutcome {
  int exit_code = kOk;
  std::string summary; // also written to `out`
};

/// argv[0] is the program name. Usage problems go to `err` with exit 2.
CommandOutcome run(const std::vector<std::string> &argv, std::ostream &out,
                   std::ostream &err);

} // namespace sentinel::cli

#endif // SENTINEL_CLI_HPP
