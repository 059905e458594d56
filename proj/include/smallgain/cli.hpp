#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smallgain::cli {

enum ExitCode : int {
    ok = 0,
    config_error = 1,
    small_gain_violated = 2,
    inconclusive = 3,
    blow_up = 4,
    bound_violated = 5,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

// The configuration emitted by `smallgain example`.
const char* bundled_example();

}  // namespace smallgain::cli
