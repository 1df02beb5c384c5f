#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vitality::cli {

// Stable exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;          // usage or config error
inline constexpr int kExitOrderingFailed = 3;  // compare-dataflows: an ordering did not hold

inline constexpr const char* kConfigDirEnv = "VITALITY_CONFIG_DIR";

// Runs the tool with argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vitality::cli
