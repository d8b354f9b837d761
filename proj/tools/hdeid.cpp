#include <iostream>

#include "hdeid/cli.hpp"

int main(int argc, char** argv) { return hdeid::run_cli(argc, argv, std::cout, std::cerr); }
