#include "sbos/cli.hpp"

int main(int argc, char** argv) { return sbos::cli::main(argc, argv); }
