#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfgp::io {

/// Entry point of the `mfgp` tool. `args` excludes the program name.
/// Returns the process exit code; failures print a one-line JSON error
/// record on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace mfgp::io
