#pragma once

namespace martingap {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitIo = 4;

// Full command-line front end; returns the process exit code. Exposed so
// tests can drive commands in-process.
int run_cli(int argc, const char* const* argv);

}  // namespace martingap
