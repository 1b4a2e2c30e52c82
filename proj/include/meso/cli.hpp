#pragma once

#include <string>
#include <vector>

namespace meso::cli {

/// Runs one CLI invocation (argv without the program name). Exit codes:
/// 0 success, 1 validation failure, 2 runtime error, 64 usage error.
int dispatch(const std::vector<std::string>& args);

}  // namespace meso::cli
