#include "vulncity/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return vulncity::run_cli(argc, argv, std::cout, std::cerr); }
