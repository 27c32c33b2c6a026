#include "gml/cli.hpp"

int main(int argc, char** argv) { return gml::cli_main(argc, argv); }
