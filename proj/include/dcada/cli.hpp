#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dcada {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitIo = 2, kExitRunFailure = 3 };

/// Entry point for the dcada command; args excludes the program name.
/// Relative output paths resolve against $DCADA_RESULTS_DIR when it is set.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dcada
