#include "trailmark/cli.hpp"

int main(int argc, char** argv) { return trailmark::run_cli(argc, argv); }
