#include "wcn/cli.hpp"

int main(int argc, char** argv) { return wcn::run_cli(argc, argv); }
