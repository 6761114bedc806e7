#include "bitglow/cli.hpp"

int main(int argc, char** argv) { return bitglow::cli::run(argc, argv); }
