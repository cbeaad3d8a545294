#include <vector>

#include "ualab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ualab::run_cli(args);
}
