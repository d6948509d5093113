#include "pmd/cli.hpp"

int main(int argc, char** argv) { return pmd::run_cli(argc, argv); }
