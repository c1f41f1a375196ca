#pragma once

// The `arcrec` command-line surface. Exit codes: 0 success, 2 configuration
// error, 3 data error, 4 runtime failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace arcrec {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

/// Parses and runs one command; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace arcrec
