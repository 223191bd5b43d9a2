#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dscore::cli {

/// Runs one CLI invocation. `args` excludes the program name.
/// Exit codes: 0 success, 1 input error, 2 numeric failure, 3 policy refusal.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dscore::cli
