#ifndef HJNET_CLI_RUN_HPP_
#define HJNET_CLI_RUN_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace hjnet::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitCfl = 3,
  kExitSolver = 4,
  kExitThreshold = 5,
};

// args[0] is the program name, as in argv.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace hjnet::cli

#endif  // HJNET_CLI_RUN_HPP_
