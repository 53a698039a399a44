#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ser {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitTraining = 3;

// `args` excludes the program name. A `--config FILE` argument expands the
// file's `key = value` lines into `--key=value` flags placed before the
// command line, so explicit flags win. Relative paths resolve against
// SER_DATA_DIR when it is set.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ser
