#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return randclt::cli::run(argc, argv, std::cout, std::cerr);
}
