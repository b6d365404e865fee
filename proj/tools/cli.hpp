#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace forge::cli {

/// Exit codes: 0 success, 1 user error, 2 internal error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace forge::cli
