#pragma once

#include <iostream>

namespace sitespec {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConflict = 3;

// Subcommands: ingest, mine, build, merge, eval, paths, serve.
int cli_run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace sitespec
