#include <iostream>
#include <vector>

#include "dynarisk/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dynarisk::run_cli(args, std::cout, std::cerr);
}
