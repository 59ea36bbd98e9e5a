#pragma once

#include <iosfwd>

namespace fuselens::cli {

enum ExitCode : int {
    kOk = 0,
    kRuntime = 1,
    kUsage = 2,
    kFormat = 3,
    kInvariant = 4,
};

// Runs the command line. Reports go to `out`, diagnostics to `err`; every
// error is one line starting with "fuselens: error[<kind>]: ".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fuselens::cli
