#include "kext/cli.hpp"

int main(int argc, char** argv) { return kext::cli::run(argc, argv); }
