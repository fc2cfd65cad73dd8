#include "hjnet/cli/run.hpp"

int main(int argc, char** argv) { return hjnet::cli::run_cli(argc, argv); }
