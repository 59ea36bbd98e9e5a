#pragma once

// Runs the command line in-process and captures both streams.

#include <sstream>
#include <string>
#include <vector>

#include "fuselens/cli.hpp"

namespace fuselens::testing {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliResult run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"fuselens"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = fuselens::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

}  // namespace fuselens::testing
