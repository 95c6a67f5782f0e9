#include <iostream>

#include "app.h"

int main(int argc, char** argv) { return d2v::cli::run_cli(argc, argv, std::cout, std::cerr); }
