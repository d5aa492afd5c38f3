#include <iostream>

#include "sdgame/cli.hpp"

int main(int argc, char** argv) { return sdgame::cli_main(argc, argv, std::cout, std::cerr); }
