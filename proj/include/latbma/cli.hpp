#pragma once

#include <string>
#include <vector>

namespace latbma {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

inline constexpr const char* kVersion = "1.0.0";

// Subcommands: fit, enumerate, explore, simulate, report. Returns the exit
// status; diagnostics go to stderr.
int run_cli(int argc, const char* const* argv);
// args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace latbma
