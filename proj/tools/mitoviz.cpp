#include <iostream>

#include "mitoviz/cli/cli.hpp"

int main(int argc, char** argv) { return mitoviz::cli::run(argc, argv, std::cout, std::cerr); }
