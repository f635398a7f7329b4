#pragma once

#include <string>
#include <vector>

namespace flicker::cli {

/// Runs one flicker-ews command (args exclude the program name).
/// Exit codes: 0 success, 1 unexpected failure, 2 usage error,
/// 3 data error, 4 numerical failure.
int run(std::vector<std::string> args);

}  // namespace flicker::cli
