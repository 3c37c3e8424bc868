#pragma once

#include <iosfwd>

namespace lowrank {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitResource = 4;

// Largest m1 * m2 accepted by any command.
inline constexpr double kMaxCells = 1e8;

/// Subcommands: simulate, fit, evaluate, regularity. Returns the exit code;
/// never throws. A one-line summary goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lowrank
