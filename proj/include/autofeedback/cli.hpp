#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "autofeedback/config.hpp"

namespace autofeedback::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags, bad config, bad inputs
inline constexpr int kExitRuntime = 2;  // run failures, backend errors

/// Entry point behind the `autofeedback` executable. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in,
            const config::EnvLookup& env = config::process_env);

}  // namespace autofeedback::cli
