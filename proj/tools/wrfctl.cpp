#include "wrf/cli.hpp"

int main(int argc, char** argv) { return wrf::cli_main(argc, argv); }
