#include <string>
#include <vector>

#include "qaoaml/cli.hpp"

int main(int argc, char** argv) {
  return qaoaml::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
