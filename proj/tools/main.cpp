#include "surrobench/cli.hpp"

int main(int argc, char** argv) { return surrobench::cli::dispatch(argc, argv); }
