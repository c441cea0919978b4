#include "drugprot/cli.hpp"

int main(int argc, char** argv) { return drugprot::run_cli(argc, argv); }
