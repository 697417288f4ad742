#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rgcn/error.hpp"

namespace rgcn::cli {

/// Process exit codes.
enum ExitCode : int { kSuccess = 0, kUsage = 1, kData = 2, kNumerical = 3 };

int exit_code(ErrorKind kind);

/// Entry point behind the `rgcn` executable. Parses `args` (without the
/// program name), runs one subcommand and returns its exit code. Normal
/// output goes to `out`, diagnostics to `err`; nothing throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rgcn::cli
