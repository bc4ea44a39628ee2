#include <iostream>

#include "fedat/cli.hpp"

int main(int argc, char** argv) { return fedat::run_cli(argc, argv, std::cout, std::cerr); }
