#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace regtrack {

inline constexpr const char* kVersion = "0.1.0";

namespace cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 on success, 1 on a runtime failure, 2 on a usage error or
/// missing input.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cli
}  // namespace regtrack
