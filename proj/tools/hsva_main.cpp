#include <iostream>

#include "hsva/cli.hpp"

int main(int argc, char** argv) { return hsva::run_cli(argc, argv, std::cout, std::cerr); }
