#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdbayes {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSampler = 3;

/// `args` excludes the program name. Reports go to files under --out-dir
/// (or to `out` when it is "-"); diagnostics are single lines on `err`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace cdbayes
