// cli.hpp — argument parsing and dispatch for the freq-unravel executable.

#pragma once

namespace fdu {

// Parses `freq-unravel [mode] --config PATH [--seed N] [--trials N] [--out PATH]
// [--quick]`, loads and validates the config, and runs the mode. Returns the
// process exit code: 0 success, 1 configuration error, 2 numerical failure,
// 3 validation failure.
int cli_main(int argc, const char* const* argv);

} // namespace fdu
