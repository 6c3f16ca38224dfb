#pragma once

#include <string>
#include <vector>

namespace flowdet {

/// Runs one CLI invocation. args[0] is the program name. Returns the process
/// exit code: 0 success, 1 usage error, 2 runtime error.
int dispatch(std::vector<std::string> args);
int dispatch(int argc, const char* const* argv);

}  // namespace flowdet
