#include "gibbsflow/cli.hpp"

int main(int argc, char** argv) { return gibbsflow::cli_main(argc, argv); }
