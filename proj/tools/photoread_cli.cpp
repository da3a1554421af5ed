#include <iostream>

#include "photoread/cli.hpp"

int main(int argc, char** argv) { return photoread::run_cli(argc, argv, std::cout, std::cerr); }
