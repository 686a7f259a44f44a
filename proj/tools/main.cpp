#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "nael/parallel.hpp"

int main(int argc, char** argv)
{
    nael::tune_allocator();
    return nael::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
