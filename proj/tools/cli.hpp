#pragma once

#include <string>
#include <vector>

namespace reco::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitThreshold = 4;

// Runs one reco_lab invocation. args excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace reco::cli
