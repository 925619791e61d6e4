#include "ctal/cli.hpp"

int main(int argc, char** argv) { return ctal::cli_main(argc, argv); }
