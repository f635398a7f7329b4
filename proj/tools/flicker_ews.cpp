#include <vector>

#include "flicker/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return flicker::cli::run(std::move(args));
}
