#include "joda/cli.hpp"

int main(int argc, char** argv) { return joda::run_cli(argc, argv); }
