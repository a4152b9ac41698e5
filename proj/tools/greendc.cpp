#include <iostream>

#include "greendc/cli.hpp"

int main(int argc, char** argv) { return greendc::dispatch_command(argc, argv, std::cout, std::cerr); }
