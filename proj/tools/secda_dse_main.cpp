#include <iostream>

#include "secda_dse/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return secda_dse::cli_dispatch(args, std::cout, std::cerr);
}
