#include "tac/cli.hpp"

int main(int argc, char** argv) { return tac::run_cli(argc, argv); }
