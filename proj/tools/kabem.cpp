#include "kabem/cli.hpp"

int main(int argc, char** argv) { return kabem::cli::run(argc, argv); }
