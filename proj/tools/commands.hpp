#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tfc::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNumeric = 1;  // also any other runtime failure
inline constexpr int kConfig = 2;
inline constexpr int kData = 3;
inline constexpr int kAlignment = 4;

// Runs one command line (args excludes the program name). Progress lines go
// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tfc::cli
