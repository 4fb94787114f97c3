#include <iostream>

#include "wuneng_cli/commands.hpp"

int main(int argc, char** argv) {
  return wuneng::cli::run_cli(argc, argv, std::cout, std::cerr);
}
