#include "rrnn/cli.hpp"

int main(int argc, char** argv) { return rrnn::cli_main(argc, argv); }
