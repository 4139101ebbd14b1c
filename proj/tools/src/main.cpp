#include "g2i/cli.hpp"

int main(int argc, char** argv) { return g2i::cli_main(argc, argv); }
