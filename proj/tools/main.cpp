#include <iostream>

#include "pilotwave/cli.hpp"

int main(int argc, char** argv) {
  return pilotwave::cli_run({argv + 1, argv + argc}, std::cout, std::cerr);
}
