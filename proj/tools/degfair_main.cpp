#include <iostream>

#include "degfair/cli.hpp"

int main(int argc, char** argv) { return degfair::cli::run(argc, argv, std::cout, std::cerr); }
