#include "splinth/cli.hpp"

int main(int argc, char** argv) { return splinth::cli::main_entry(argc, argv); }
