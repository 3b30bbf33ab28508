#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace infodemic::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. args excludes the program name. The streams carry
/// progress output, diagnostics and terminal-oracle input.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);
int run_cli(int argc, char** argv);

} // namespace infodemic::cli
