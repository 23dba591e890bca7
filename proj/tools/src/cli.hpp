#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace confdrift::cli {

enum ExitCode : int {
    kOk = 0,
    kDriftAlert = 1,
    kUsage = 2,
    kRuntime = 3,
};

/// Runs the command line `args` (without the program name). Standard input
/// is read when an input path is "-".
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace confdrift::cli
