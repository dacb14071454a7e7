#include <iostream>

#include "dcada/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dcada::run_cli(args, std::cout, std::cerr);
}
