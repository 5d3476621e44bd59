#include "sketchsolve_cli.hpp"

int main(int argc, char** argv) { return sketchsolve::cli::run(argc, argv); }
