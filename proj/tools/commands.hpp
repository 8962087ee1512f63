#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vym::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

/// Parses and runs one command line; returns the process exit code.
/// `env_seed` stands in for VYM_SEED (empty when unset).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::string& env_seed = {});

}  // namespace vym::cli
