#include "listreader/cli.hpp"

int main(int argc, char** argv) { return listreader::run_cli(argc, argv); }
