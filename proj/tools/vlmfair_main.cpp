#include <iostream>
#include <string>
#include <vector>

#include "vlmfair/cli.hpp"

int main(int argc, char** argv) {
  return vlmfair::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
