#include <iostream>
#include <string>
#include <vector>

#include "objcap/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return objcap::cli_dispatch(args, std::cout, std::cerr);
}
