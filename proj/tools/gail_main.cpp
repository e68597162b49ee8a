#include "gail/cli.hpp"

int main(int argc, char** argv) { return gail::cli_main(argc, argv); }
