#include <iostream>

#include "netlavarx/cli.hpp"

int main(int argc, char** argv) { return netlavarx::cli::dispatch(argc, argv, std::cout, std::cerr); }
