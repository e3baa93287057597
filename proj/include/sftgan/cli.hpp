#pragma once

#include <iosfwd>

namespace sftgan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the sftgan command line: synth, train, infer, gradcheck,
/// ablate, dump-maps, metrics. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sftgan
