#pragma once

// Command-line front end:
//
//   sslt gen-data  --config C --out DIR [--seed S]
//   sslt train     --config C --out DIR [--seed S]
//   sslt baseline  --config C --out DIR [--seed S]
//   sslt ablate    --config C --out DIR --variant V [--seed S]
//   sslt eval      --out RUN_DIR [--config C] [--checkpoint F] [--format rows|structured]
//   sslt report    --out DIR [--format rows|structured] RUN_DIR...
//
// Exit codes: 0 ok, 2 usage or config error, 3 data error, 4 numeric
// divergence, 1 anything else.

#include <iosfwd>
#include <string>
#include <vector>

namespace sslt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sslt::cli
