#include <iostream>

#include "g2s/cli.hpp"

int main(int argc, char** argv) {
    return g2s::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
