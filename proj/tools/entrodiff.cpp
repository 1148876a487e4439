#include <iostream>

#include "entrodiff/cli/commands.hpp"

int main(int argc, char** argv) { return entrodiff::cli::run_cli(argc, argv, std::cout, std::cerr); }
