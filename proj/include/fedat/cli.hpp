#pragma once

#include <iosfwd>

namespace fedat {

/// Exit codes: 0 success, 1 runtime failure, 2 usage/config/IO error.
/// Errors go to `err` as one JSON object per line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fedat
