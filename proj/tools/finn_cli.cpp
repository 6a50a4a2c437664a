#include "finn/cli.hpp"

int main(int argc, char** argv) { return finn::cli::run(argc, argv); }
