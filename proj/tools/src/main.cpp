#include <iostream>
#include <string>
#include <vector>

#include "ftol/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ftol::cli::run(args, std::cout, std::cerr);
}
