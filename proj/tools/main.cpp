#include "mtvqa/cli.hpp"

int main(int argc, char** argv) { return mtvqa::cli::run_cli(argc, argv); }
