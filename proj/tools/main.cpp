#include <iostream>

#include "skillcraft/cli.hpp"

int main(int argc, char** argv) { return skillcraft::run_cli(argc, argv, std::cout, std::cerr); }
