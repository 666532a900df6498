#include <iostream>

#include "dvfsim/cli.hpp"

int main(int argc, char** argv) {
  return dvfsim::run_cli(argc, argv, std::cout, std::cerr);
}
