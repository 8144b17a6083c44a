#pragma once

#include <string>
#include <vector>

namespace plants::cli {

// Runs one plants invocation. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 numeric failure. Diagnostics go to stderr.
int run(const std::vector<std::string>& args);

}  // namespace plants::cli
