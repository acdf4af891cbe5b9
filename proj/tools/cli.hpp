#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prodmed::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Runs the command line `args` (program name excluded), writing results to `out` and
/// diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prodmed::cli
