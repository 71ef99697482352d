#include <iostream>

#include "sonarfit/cli/cli.hpp"

int main(int argc, char** argv) { return sonarfit::cli::run(argc, argv, std::cout, std::cerr); }
