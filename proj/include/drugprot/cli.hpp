#pragma once

#include <string>
#include <vector>

namespace drugprot {

inline constexpr const char* kOutputDirEnv = "DRUGPROT_OUTPUT_DIR";

/// Entry point of the `drugprot` tool. Returns the process exit status:
/// 0 ok, 2 config error, 3 data error, 4 missing artifact, 5 numeric failure.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace drugprot
