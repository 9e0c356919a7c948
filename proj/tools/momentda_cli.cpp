#include <iostream>

#include "momentda/cli.hpp"

int main(int argc, char** argv) { return momentda::cli::run(argc, argv, std::cout, std::cerr); }
