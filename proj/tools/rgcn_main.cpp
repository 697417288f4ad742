#include <iostream>
#include <string>
#include <vector>

#include "rgcn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rgcn::cli::run(args, std::cout, std::cerr);
}
