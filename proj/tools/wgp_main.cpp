#include "wgp/cli.hpp"

int main(int argc, char** argv) { return wgp::run_cli(argc, argv); }
