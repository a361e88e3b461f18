#pragma once

#include <string>
#include <vector>

namespace codesearch {

// Runs one CLI invocation; args exclude the program name. Returns the
// process exit code. All diagnostics go to stderr, data to files or
// stdout.
int run_cli(std::vector<std::string> args);

}  // namespace codesearch
