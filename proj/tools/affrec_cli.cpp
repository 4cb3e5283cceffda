// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "affrec/cli.hpp"

int main(int argc, char** argv) { return affrec::cli_main(argc, argv, std::cout, std::cerr); }
