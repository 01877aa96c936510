#pragma once

namespace t2d {

/// Entry point of the t2d command line tool. Returns the process exit code:
/// 0 success, 1 validation error, 2 runtime error.
int run_cli(int argc, char** argv);

}  // namespace t2d
