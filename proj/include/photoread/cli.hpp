#pragma once

#include <iosfwd>

namespace photoread {

/// Entry point of the photoread command line. Returns the process exit code:
/// 0 success, 2 config, 3 data, 4 calibration, 5 numerical or training, 6 other domain errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace photoread
