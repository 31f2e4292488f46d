#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return gedmd::cli::main(argc, argv, std::cout, std::cerr);
}
