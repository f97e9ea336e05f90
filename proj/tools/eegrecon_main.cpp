#include "eegrecon/cli.hpp"

int main(int argc, char** argv) { return eegrecon::run_cli(argc, argv); }
