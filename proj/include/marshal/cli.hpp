#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace marshal::cli {

enum class ExitCode : int {
    Success = 0,
    Usage = 1,
    Config = 2,
    Dataset = 3,
    BackendExhausted = 4,
    Internal = 5,
};

/// Entry point shared by the `marshal` binary and the tests. `args` excludes argv[0].
ExitCode run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace marshal::cli
