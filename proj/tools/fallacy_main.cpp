#include <iostream>

#include "fallacy/cli.hpp"

int main(int argc, char** argv) { return fallacy::cli::main(argc, argv, std::cout, std::cerr); }
