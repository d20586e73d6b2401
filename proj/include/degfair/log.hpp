#pragma once

#include <string_view>

namespace degfair::log {

// Warnings go to stderr unless silenced (tests and benchmarks silence them).
void warn(std::string_view message);
void set_quiet(bool quiet);
bool quiet();

}  // namespace degfair::log
