#include <iostream>

#include "bnncert/cli.hpp"

int main(int argc, char** argv) { return bnncert::run_cli(argc, argv, std::cout, std::cerr); }
