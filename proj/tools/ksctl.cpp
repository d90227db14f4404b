#include <iostream>

#include "kscontrol/cli.hpp"

int main(int argc, char** argv) { return ksc::run_cli(argc, argv, std::cout, std::cerr); }
