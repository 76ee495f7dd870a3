#pragma once

#include <iosfwd>

namespace rigrecon::cli {

/// Entry point of the `rigrecon` tool. Returns 0 on success, 1 on invalid
/// input or usage, 2 on a numerical failure; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rigrecon::cli
