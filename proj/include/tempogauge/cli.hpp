#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tempogauge::cli {

// Runs the command line (without the program name). Exit status 0 on
// success, 1 on input problems (bad flags, unreadable files, contract
// violations), 2 on internal failures. Output goes to the given streams so
// tests can drive the CLI in process.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace tempogauge::cli
