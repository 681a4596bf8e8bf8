#include "sitespec/cli.hpp"

int main(int argc, char** argv) { return sitespec::cli_run(argc, argv); }
