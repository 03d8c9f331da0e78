#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ael::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Parses and runs one command. Never throws; failures map to the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 8695336 -> "8,695,336".
std::string group_thousands(unsigned long long value);

}  // namespace ael::cli
