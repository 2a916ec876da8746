#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace polyheat {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // numerical or I/O failure, JSON report on the error stream
inline constexpr int kExitUsage = 2;    // invalid subcommand or flags

/// Runs one command line (args[0] is the program name). Human-readable output
/// goes to out, error reports to err.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SuiteResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
};

/// Identity, biorthogonality, parity and round-trip checks behind `verify`.
std::vector<SuiteResult> run_verify_suites();

}  // namespace polyheat
