#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kabem::cli {

// Runs one subcommand. Results go to `out`, the resolved config and progress
// to `err`. Returns the process exit code: 0 only if the requested artifact
// was fully produced.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace kabem::cli
