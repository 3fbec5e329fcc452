#ifndef SEQMC_CLI_HPP
#define SEQMC_CLI_HPP

#include <string>
#include <vector>

namespace seqmc::cli {

/// Runs one subcommand (args without the program name). Exit codes: 0 on
/// success, 2 for configuration errors, 3 for numerical aborts.
int run(std::vector<std::string> args);

}  // namespace seqmc::cli

#endif
