#include <string>
#include <vector>

#include <clis/cli.hpp>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return clis::cli::run(std::move(args));
}
