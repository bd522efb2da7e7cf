#include "levystop/cli.hpp"

int main(int argc, char** argv) { return levystop::cli_main(argc, argv); }
