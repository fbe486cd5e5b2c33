#include "cosserat/cli.hpp"

int main(int argc, char** argv) { return cosserat::cli::run(argc, argv); }
