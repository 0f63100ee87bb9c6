#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clfstab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSimulation = 3;
inline constexpr int kExitCheckFailed = 4;

// Runs one command line (without the program name). Reports go to `out`
// unless --out names a file; errors are one JSON object per line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clfstab::cli
