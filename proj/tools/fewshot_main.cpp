#include <iostream>

#include "fewshot/cli.hpp"

int main(int argc, char** argv) { return fewshot::parse_and_dispatch(argc, argv, std::cout, std::cerr); }
