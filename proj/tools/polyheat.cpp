#include <iostream>
#include <string>
#include <vector>

#include "polyheat/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return polyheat::run_command(args, std::cout, std::cerr);
}
