#include <iostream>
#include <string>
#include <vector>

#include "eprlock/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return eprlock::cli::run(args, std::cout, std::cerr);
}
