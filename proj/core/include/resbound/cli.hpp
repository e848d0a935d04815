#pragma once

#include <string>
#include <vector>

namespace resbound {

// The whole command-line surface, callable in-process for tests. `args`
// excludes the program name. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 numeric failure.
int run_cli(std::vector<std::string> args);
int run_cli(int argc, const char* const* argv);

}  // namespace resbound
