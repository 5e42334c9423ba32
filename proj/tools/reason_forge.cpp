#include "reasonforge/cli.hpp"

int main(int argc, char** argv) { return reasonforge::cli::run(argc, argv); }
