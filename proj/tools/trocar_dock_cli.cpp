#include <iostream>

#include "trocar_dock/cli.hpp"

int main(int argc, char** argv) { return trocar_dock::cli_main(argc, argv, std::cout, std::cerr); }
