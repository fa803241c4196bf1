#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace joda {

/// Exit codes: 0 ok, 1 validation, 2 I/O, 3 network, 4 numerical divergence.
/// Errors go to `err` as one JSON line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace joda
