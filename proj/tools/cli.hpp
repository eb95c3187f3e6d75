#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pmcts::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitSearchAborted = 2;
inline constexpr int kExitConfig = 64;
inline constexpr int kExitData = 65;

/// Entry point shared by the binary and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pmcts::cli
