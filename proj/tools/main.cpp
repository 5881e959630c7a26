#include "cli.hpp"

int main(int argc, char** argv) { return hmmse::cli::run(argc, argv); }
