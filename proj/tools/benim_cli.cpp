#include "benim/cli.hpp"

int main(int argc, char** argv) { return benim::run_cli(argc, argv); }
