#include "levitrap/cli.hpp"

int main(int argc, char** argv) { return levitrap::cli::run_cli(argc, argv); }
