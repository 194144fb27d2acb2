#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace balltrack::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one command line. args[0] is the program name. Standard input and
/// output are only touched through the given streams.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace balltrack::cli
