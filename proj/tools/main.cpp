#include <string>
#include <vector>

#include "seqmc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return seqmc::cli::run(std::move(args));
}
