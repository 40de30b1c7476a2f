#include <iostream>
#include <string>
#include <vector>

#include "tempogauge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tempogauge::cli::run(args, std::cout, std::cerr);
}
