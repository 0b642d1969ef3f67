#include "isch/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return isch::cli::run(argc, argv, std::cout, std::cerr); }
