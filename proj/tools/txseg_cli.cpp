#include "txseg/commands.hpp"

int main(int argc, char** argv) { return txseg::run_cli(argc, argv); }
