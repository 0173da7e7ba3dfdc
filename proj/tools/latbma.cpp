#include "latbma/cli.hpp"

int main(int argc, char** argv) { return latbma::run_cli(argc, argv); }
