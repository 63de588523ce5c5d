#pragma once

#include <string>
#include <vector>

namespace dln {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitData = 4;
inline constexpr int kExitConfig = 5;
inline constexpr int kExitDivergence = 6;
inline constexpr int kExitFormat = 7;

/// Runs the command line tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace dln
