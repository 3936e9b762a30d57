#include <iostream>
#include <string>
#include <vector>

#include "hafno/cli/cli.hpp"

int main(int argc, char** argv) {
    return hafno::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
