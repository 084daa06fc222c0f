#include "cdtrade/cli.hpp"

int main(int argc, char** argv) { return cdtrade::cli_main(argc, argv); }
