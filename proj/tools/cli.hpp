#ifndef GRAIN_TOOLS_CLI_HPP
#define GRAIN_TOOLS_CLI_HPP

#include <ostream>
#include <string>
#include <utility>

#include "grain/tensor.hpp"

namespace grain::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;

struct Verdict {
  std::string class_name;
  double probability = 0.0;
  std::string formatted;  // "this is a <class> with possibility <p to 5 decimals>"
};

Verdict make_verdict(const std::string& class_name, double probability);

/// Parses "HxW" (an ASCII 'x' or a UTF-8 multiplication sign). Throws ConfigError.
std::pair<Index, Index> parse_input_size(const std::string& text);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace grain::cli

#endif  // GRAIN_TOOLS_CLI_HPP
