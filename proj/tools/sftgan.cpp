#include <iostream>

#include "sftgan/cli.hpp"

int main(int argc, char** argv) { return sftgan::run_cli(argc, argv, std::cout, std::cerr); }
