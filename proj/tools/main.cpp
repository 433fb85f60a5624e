#include <string>
#include <vector>

#include "adnn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return adnn::run_cli(args);
}
