#pragma once

#include <iosfwd>

namespace nsx {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitCorrupt = 3,  // bad bitstream, or a bitstream written by another model
  kExitDivergence = 4,
};

/// Command-line entry point: train, encode, decode, eval, report, synth.
/// Progress goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nsx
