#pragma once

#include <string>
#include <vector>

namespace shemfc {

/// Command-line surface binding the toolkit modules. Returns the process
/// exit code: 0 success, 2 validation error, 3 numerical-failure signal
/// (partial output is still written where possible).
int cli_run(const std::vector<std::string>& args);
int cli_run(int argc, const char* const* argv);

}  // namespace shemfc
