#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pckad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAlerts = 3;  // detect emitted at least one alert

// Runs one `pckad` invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pckad::cli
