#ifndef HISTSEM_CLI_HPP_
#define HISTSEM_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace histsem {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,     // malformed arguments or input
  kExitIo = 3,        // unreadable or unwritable paths
  kExitMismatch = 4,  // inputs that do not line up (usage ids, dimensions)
};

// Runs the histsem command line; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace histsem

#endif  // HISTSEM_CLI_HPP_
