#include <string>
#include <vector>

#include "meso/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return meso::cli::dispatch(args);
}
