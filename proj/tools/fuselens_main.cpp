#include <iostream>

#include "fuselens/cli.hpp"

int main(int argc, char** argv) { return fuselens::cli::run(argc, argv, std::cout, std::cerr); }
