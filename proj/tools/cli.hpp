#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ecad::cli {

// Runs the `ecad` command line. Output goes to `out`, diagnostics to `err`.
// Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ecad::cli
