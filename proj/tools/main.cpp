#include "fdu/cli.hpp"

int main(int argc, char** argv) { return fdu::cli_main(argc, argv); }
