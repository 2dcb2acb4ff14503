#pragma once

#include <string>
#include <vector>

namespace softstop {

/// Command-line entry point (argv without the program name).  Returns the
/// process exit status: 0 on success, 1 on runtime errors (one-line cause on
/// stderr), 2 on usage errors.  Lives in the library so tests can drive the
/// tool in-process.
int run_cli(const std::vector<std::string>& args);

}  // namespace softstop
