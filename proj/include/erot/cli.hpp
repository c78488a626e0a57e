#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace erot::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 2 validation or configuration error, 3 solver
/// non-convergence, 1 unexpected internal failure. Errors are reported as a
/// JSON object on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool use_env = true);
int run(int argc, const char* const* argv);

}  // namespace erot::cli
