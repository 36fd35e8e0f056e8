#include <iostream>

#include "qnrl_app/commands.hpp"

int main(int argc, char** argv) { return qnrl::app::run_cli(argc, argv, std::cout, std::cerr); }
