#pragma once

#include <iosfwd>

namespace attfc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Entry point of the `attfc` tool: subcommands train, gradcheck, bench and compare.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace attfc
