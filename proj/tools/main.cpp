#include "cizsl/cli.hpp"

int main(int argc, char** argv) { return cizsl::run_cli(argc, argv); }
