#pragma once

namespace bae {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitFailure = 2;

/// Parses argv, dispatches the subcommand and maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace bae
