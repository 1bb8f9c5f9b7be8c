#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bank::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kApiError = 1;  // API/auth error or network failure
inline constexpr int kUsage = 2;

// Runs one `bank` invocation. `args` excludes the program name. Passwords are
// read line by line from `in` (echo is disabled when `in` is a terminal).
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace bank::cli
