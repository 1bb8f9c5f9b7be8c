#include <iostream>

#include "bank/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bank::cli::run(args, std::cin, std::cout, std::cerr);
}
