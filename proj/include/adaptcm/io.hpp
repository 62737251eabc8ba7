#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace adaptcm {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a full token; throws std::invalid_argument otherwise.
double parse_double(std::string_view token);

std::vector<std::string> split(std::string_view line, char sep);

}  // namespace adaptcm
