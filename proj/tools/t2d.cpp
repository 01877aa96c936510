#include "t2d/cli.hpp"

int main(int argc, char** argv) { return t2d::run_cli(argc, argv); }
