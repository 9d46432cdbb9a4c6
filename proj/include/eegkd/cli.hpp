#pragma once

#include <string>
#include <vector>

namespace eegkd::cli {

// Exit codes: 0 success, 1 usage/config error (message on stderr with the
// offending field), 2 runtime failure under a validated config.
int dispatch(const std::vector<std::string>& args);

} // namespace eegkd::cli
