#include <iostream>

#include "qdc/cli.hpp"

int main(int argc, char** argv) {
  return qdc::cli::run(argc, argv, std::cout, std::cerr);
}
