// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <string>
#include <vector>

#include "bbpose/cli.hpp"

int main(int argc, char** argv)
{
    return bbpose::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
