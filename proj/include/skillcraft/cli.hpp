#pragma once

#include <ostream>

namespace skillcraft {

/// Entry point of the `skillcraft` tool. Exit codes: 0 success, 1 runtime
/// failure, 2 usage or configuration error. Errors are written to `err` as
/// one JSON object per line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace skillcraft
