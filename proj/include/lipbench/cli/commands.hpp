#pragma once

#include <iosfwd>

namespace lipbench::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // unexpected internal error
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Parses argv and runs one command. Progress goes to `out`, errors to `err`;
/// the last line written to `out` is always a key=value summary.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lipbench::cli
