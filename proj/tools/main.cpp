#include <iostream>

#include "attfc/cli.hpp"

int main(int argc, char** argv) { return attfc::run_cli(argc, argv, std::cout, std::cerr); }
