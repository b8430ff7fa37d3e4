#include <iostream>
#include <string>
#include <vector>

#include "labeleff/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return labeleff::cli::run(args, std::cout, std::cerr);
}
