#include <iostream>

#include "intman/cli.hpp"

int main(int argc, char** argv) { return intman::cli(argc, argv, std::cout, std::cerr); }
