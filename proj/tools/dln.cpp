#include "dln/cli.hpp"

int main(int argc, char** argv) {
  return dln::run_cli(argc, argv);
}
