#pragma once

#include <string>
#include <vector>

namespace wpool::cli {

// Full command-line surface, in-process for testability. Exit codes:
// 0 success, 1 usage, 2 data/format, 3 capacity/config.
int run(const std::vector<std::string>& args);

}  // namespace wpool::cli
