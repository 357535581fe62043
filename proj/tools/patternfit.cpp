#include <patternfit/cli.hpp>

int main(int argc, char **argv) { return patternfit::run_cli(argc, argv); }
