#include <string>
#include <vector>

#include "wpool/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wpool::cli::run(args);
}
