#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tipscan {

/// Runs one command line. args[0] is the program name. Returns the exit code:
/// 0 success, 1 domain error, 2 usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace tipscan
