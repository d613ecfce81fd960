#include <iostream>
#include <string>
#include <vector>

#include "pitchcoach/service/cli.h"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  std::vector<std::string> args(argv + 1, argv + argc);
  return pitchcoach::service::run_cli(args, std::cin, std::cout, std::cerr);
}
