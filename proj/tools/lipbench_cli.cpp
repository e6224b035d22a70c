#include <iostream>

#include "lipbench/cli/commands.hpp"

int main(int argc, char** argv) { return lipbench::cli::run_cli(argc, argv, std::cout, std::cerr); }
