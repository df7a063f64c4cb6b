#include <iostream>

#include "coagdiff/commands.hpp"

int main(int argc, char** argv) { return coagdiff::cli_main(argc, argv, std::cout, std::cerr); }
