#pragma once

// Command-line front end: synth, train, eval, sweep, ablate, retrieve.
//
// Exit codes: 0 success, 2 validation error (including bad flags), 3
// numeric failure, 4 I/O error, 1 anything else. When --out is omitted the
// output directory comes from the CIZSL_OUT environment variable.

#include <string>
#include <vector>

namespace cizsl {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr const char* kOutEnv = "CIZSL_OUT";

enum ExitCode { kExitOk = 0, kExitOther = 1, kExitValidation = 2, kExitNumeric = 3, kExitIo = 4 };

/// Runs one command; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace cizsl
