#include "infodemic/cli.hpp"

int main(int argc, char** argv) { return infodemic::cli::run_cli(argc, argv); }
