#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return dustat::cli::run(argc, argv, std::cout, std::cerr); }
