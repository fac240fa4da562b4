#include "cli.hpp"

int main(int argc, char** argv) { return skelfont::cli::run(argc, argv); }
