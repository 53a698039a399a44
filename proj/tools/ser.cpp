#include <iostream>
#include <string>
#include <vector>

#include "ser/cli.hpp"

int main(int argc, char** argv) {
  return ser::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
