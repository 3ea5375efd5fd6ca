#include "bicamo/cli.hpp"

int main(int argc, char** argv) { return bicamo::cli_run(argc, argv); }
