#include "plants/cli.hpp"

int main(int argc, char** argv) {
  return plants::cli::run({argv + 1, argv + argc});
}
