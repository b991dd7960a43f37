#include "gci/cli.hpp"

int main(int argc, char** argv) { return gci::cli::main(argc, argv); }
