// cli.hpp - the concentra command-line front end.
//
// Exit codes: 0 success or pass, 1 certified failure, 2 input error or bad
// usage, 3 solver or resource failure.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace concentra::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInternal = 3;

// args excludes the program name. Results go to `out` unless --out is given.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace concentra::cli
