#include "cli.hpp"

int main(int argc, char** argv) { return shemfc::cli_run(argc, argv); }
