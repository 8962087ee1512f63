#include <cstdlib>
#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  const char* env = std::getenv("VYM_SEED");
  return vym::cli::run({argv + 1, argv + argc}, std::cout, std::cerr, env ? env : "");
}
