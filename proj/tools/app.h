#pragma once

#include <iosfwd>

namespace d2v::cli {

// Runs one `d2v` command. Returns 0 on success, 1 on a runtime failure and
// 2 on a usage error. Results go to `out`, diagnostics and progress to `err`.
// D2V_SEED is read from the environment.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace d2v::cli
