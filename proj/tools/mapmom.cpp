#include "mapmom/cli.hpp"

int main(int argc, char** argv) { return mapmom::cli::main_entry(argc, argv); }
