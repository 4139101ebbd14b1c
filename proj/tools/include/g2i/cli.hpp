#pragma once

#include <string>
#include <vector>

namespace g2i {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_runtime = 2;

/// Command-line entry point. `args` excludes the program name.
/// Returns 0 on success, 1 on a usage error, 2 on a runtime error.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, char** argv);

} // namespace g2i
