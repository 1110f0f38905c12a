#pragma once

#include <iosfwd>

namespace causalstab::cli
{

/// Exit codes: 0 success, 1 internal error, 2 configuration error, 3 I/O error, 4 sequence length mismatch.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace causalstab::cli
