#include <iostream>
#include <string>
#include <vector>

#include "nvr/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return nvr::cli::run(args, std::cout, std::cerr);
}
