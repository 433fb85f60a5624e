#pragma once

#include <string>
#include <vector>

namespace adnn {

// Entry point behind the `adnn` binary; also callable in-process by tests.
// argv-style arguments without the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace adnn
