#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace skelfont::cli {

// Exit codes: 0 success, 1 invalid usage or input, 2 runtime abort.
// Failures print "error_code: NAME" followed by the message to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace skelfont::cli
