#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace smear::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // validation or runtime failure
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smear::cli
