#include "aia/cli.hpp"

int main(int argc, char** argv) { return aia::run_cli(argc, argv); }
