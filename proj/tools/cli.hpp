#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lmrmt::cli {

/// Runs the command line; returns the process exit code
/// (0 success, 1 numerical failure, 2 usage or configuration error).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lmrmt::cli
