#include "adagtcn/cli.hpp"

int main(int argc, char** argv) { return adagtcn::run_cli(argc, argv); }
