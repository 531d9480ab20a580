#include "geognn/cli.hpp"

int main(int argc, char** argv) { return geognn::run_cli(argc, argv); }
