#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace darkgram::cli {

/// One invocation of the darkgram command line. `args` excludes the program
/// name. Returns the process exit code: 0 ok, 1 input error (including bad
/// flags), 2 environment or service error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace darkgram::cli
