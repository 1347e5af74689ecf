#include "tocs/cli.hpp"

int main(int argc, char** argv) { return tocs::cli::run(argc, argv); }
