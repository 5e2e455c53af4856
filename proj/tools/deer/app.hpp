#pragma once

namespace deer::cli {

/// Entry point behind main(): parses argv, dispatches subcommands, maps
/// errors to exit codes (0 success, 1 runtime failure with partial outputs
/// flushed and marked incomplete, 2 configuration errors naming the key).
int run(int argc, const char* const* argv);

}  // namespace deer::cli
