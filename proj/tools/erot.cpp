#include "erot/cli.hpp"

int main(int argc, char** argv) { return erot::cli::run(argc, argv); }
