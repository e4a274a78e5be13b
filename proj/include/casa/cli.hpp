#pragma once

#include <string>
#include <vector>

namespace casa::cli {

// Entry point shared by the casa binary and the tests. Returns the process
// exit code: 0 success, 2 configuration error, 1 runtime error.
int run(const std::vector<std::string>& args);

}  // namespace casa::cli
