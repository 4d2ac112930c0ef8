#include <iostream>

#include "otdp_cli/commands.hpp"

int main(int argc, char** argv) { return otdp::cli::run(argc, argv, std::cout, std::cerr); }
