#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace g2s {

inline constexpr int kExitOk = 0;
/// Some goals, records or stories failed; everything else was written.
inline constexpr int kExitPartial = 1;
/// Bad flags, config or input files.
inline constexpr int kExitUsage = 2;

/// Command-line entry point. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace g2s
