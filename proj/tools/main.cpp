#include "martingap/cli.hpp"

int main(int argc, char** argv) { return martingap::run_cli(argc, argv); }
