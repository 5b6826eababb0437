#pragma once

// Command-line front end: run, list, check and render-data.
//
// Exit codes: 0 success, 1 failed check or other error, 2 config or usage
// error, 3 numerical abort.

#include <iosfwd>
#include <string>
#include <vector>

namespace pilotwave {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// args excludes the program name.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pilotwave
