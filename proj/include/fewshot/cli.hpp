#pragma once

#include <iosfwd>

namespace fewshot {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitDataError = 2;

/// Entry point of the `fewshot` tool. Results go to `out` (or --out), errors
/// and warnings to `err`.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fewshot
