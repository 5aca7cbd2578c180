#include <string>
#include <vector>

#include "sagpr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return sagpr::run_command(args);
}
