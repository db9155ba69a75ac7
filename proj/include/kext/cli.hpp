#pragma once

#include <string>
#include <vector>

// Command-line surface: figure reproduction and one-off bound computations.
// Subcommands: privacy-max, key-oneshot, key-nshot, min-copies, privcap,
// min-uses, channel, fig1. Exit codes: 0 success, 1 bad arguments, 2 solver
// guard exceeded, 3 invalid input object.

namespace kext::cli {

int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without program name

}  // namespace kext::cli
