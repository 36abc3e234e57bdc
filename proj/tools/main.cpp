#include "codamed/cli.hpp"

int main(int argc, char** argv) { return codamed::cli::run_cli(argc, argv); }
