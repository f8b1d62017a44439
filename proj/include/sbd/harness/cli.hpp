#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sbd {

// Subcommands: train, sample, eval, roofline, trace-report.
// Exit codes: 0 success (and --help), 2 bad usage or ConfigError, 1 any other
// failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// argv[0] is supplied internally.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sbd
