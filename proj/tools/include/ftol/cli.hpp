#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ftol::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kDataError = 2,
  kNumericalError = 3,
  kInternalError = 4,
};

// Runs one `ftol` invocation. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace ftol::cli
