#include <iostream>

#include "fracctrl/cli.hpp"

int main(int argc, char** argv) {
  return fracctrl::parse_and_dispatch(argc, argv, std::cout, std::cerr);
}
