#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cotstream::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

// Entry point for the `cotstream` command: run | simulate | report.
// argv[0] is the program name.
int execute(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace cotstream::cli
