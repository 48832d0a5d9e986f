#include "subnorm/cli.hpp"

int main(int argc, char** argv) { return subnorm::cli_main(argc, argv); }
