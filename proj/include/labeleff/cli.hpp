#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace labeleff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code: 0 success, 1 a verified bound was violated,
/// 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace labeleff::cli
