#include "aspectrl/commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return aspectrl::cli::run(argc, argv, std::cout, std::cerr);
}
