#pragma once

#include <string_view>

namespace nbibd::cli {

inline constexpr std::string_view kVersion = "1.0.0";

// Exit codes: 0 success, 1 validation failure / infeasible generation / fit failure,
// 2 malformed input or bad flags.
int run(int argc, const char* const* argv);

}  // namespace nbibd::cli
