#include <iostream>

#include "requal/cli.hpp"

int main(int argc, char** argv) { return requal::cli::run_cli(argc, argv, std::cout, std::cerr); }
