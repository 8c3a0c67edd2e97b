// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line front end: plan, quantize, eval, train, bench, sweep.
//
// Exit codes: 0 success, 1 usage error, 2 data error (bad/missing file, shape
// mismatch, infeasible target), 3 numeric failure (divergence, NaN/Inf).

#include <filesystem>
#include <string>
#include <vector>

namespace littlebit {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

struct CommandOutcome {
  int exit_code = kExitOk;
  std::string summary;  // human-readable; stdout on success, stderr otherwise
  std::vector<std::filesystem::path> artifacts;
};

/// Runs one command; args exclude the program name.
CommandOutcome run_command(const std::vector<std::string>& args);

/// run_command plus printing of the summary. Returns the exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace littlebit
