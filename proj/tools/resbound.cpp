#include "resbound/cli.hpp"

int main(int argc, char** argv) { return resbound::run_cli(argc, argv); }
