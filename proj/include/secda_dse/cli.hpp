#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace secda_dse {

// Exit codes: 0 success, 1 domain error, 2 usage error.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace secda_dse
