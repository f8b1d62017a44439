#include <iostream>

#include "sbd/harness/cli.hpp"

int main(int argc, char** argv) { return sbd::run_cli(argc, argv, std::cout, std::cerr); }
