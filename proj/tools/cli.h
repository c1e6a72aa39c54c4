#pragma once

#include <iosfwd>

namespace planemerge::cli {

// Exit codes: 0 success, 2 bad input (parse, validation, I/O), 3 pipeline
// failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPipeline = 3;

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace planemerge::cli
