#include <iostream>

#include "aclust/cli.hpp"

int main(int argc, char** argv) { return aclust::cli::run_cli(argc, argv, std::cout, std::cerr); }
