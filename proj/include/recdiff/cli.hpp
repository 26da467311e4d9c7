#pragma once

#include <string>
#include <vector>

namespace recdiff::cli {

// Entry point shared by the binary and the in-process CLI tests.
int run(const std::vector<std::string>& args);

}  // namespace recdiff::cli
