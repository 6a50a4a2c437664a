#pragma once

namespace finn::cli {

/// Entry point for the command line tool; returns the process exit code.
int run(int argc, char** argv);

}  // namespace finn::cli
