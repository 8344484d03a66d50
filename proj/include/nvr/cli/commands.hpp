#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nvr::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitCorrupt = 4;

/// Runs one `nvrc` invocation. `args[0]` is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nvr::cli
