#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace embanon::harness {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

// Runs the tool with `args` (program name excluded). Regular output goes to
// `out`, usage text and error messages to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace embanon::harness
