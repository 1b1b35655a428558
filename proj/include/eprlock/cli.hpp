#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace eprlock::cli {

enum ExitCode : int { ok = 0, config_error = 2, domain_error = 3, numerical_error = 4 };

/// Entry point of the `eprlock` tool. `args` includes the program name.
/// Results go to files under the output directory (plus JSON summaries on
/// `out`); failures are reported as one JSON object on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eprlock::cli
