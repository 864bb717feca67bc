#include <iostream>

#include "nsx/harness/cli.hpp"

int main(int argc, char** argv) { return nsx::run_cli(argc, argv, std::cout, std::cerr); }
