#pragma once

#include <iosfwd>

namespace dvfsim {

/// Exit codes: 0 success, 1 validation error, 2 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Entry point of the `dvfsim` tool with subcommands generate, simulate,
/// compare and model.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dvfsim
