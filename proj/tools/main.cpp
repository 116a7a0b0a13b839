#include <iostream>

#include "urlcomsum/cli.hpp"

int main(int argc, char** argv) { return urlcomsum::run_cli(argc, argv, std::cout, std::cerr); }
