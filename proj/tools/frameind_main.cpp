#include <iostream>
#include <string>
#include <vector>

#include "frameind/cli.hpp"

int main(int argc, char** argv) {
  return frameind::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
