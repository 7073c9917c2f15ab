#include "ciforge/cli.hpp"

int main(int argc, char** argv) { return ciforge::cli::dispatch(argc, argv); }
