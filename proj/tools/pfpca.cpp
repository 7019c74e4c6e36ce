#include "pfpca/cli.hpp"

int main(int argc, char** argv) { return pfpca::run_cli(argc, argv); }
