#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace freezenet {

// Process exit codes.
enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_usage = 2,
  exit_data = 3,
  exit_codec = 4,
  exit_numeric = 5,
};

// Runs the command line `args` (without the program name). Subcommands:
// train, probe, compress, decompress, info.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace freezenet
