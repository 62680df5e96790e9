#pragma once

#include "pstudio/error.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pstudio::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntime = 1,
  kUsage = 2,
  kMismatch = 3,
};

int exit_code_for(ErrorCode code);

/// Runs `pstudio <args...>` in-process; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pstudio::cli
