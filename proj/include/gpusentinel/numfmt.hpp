#pragma once

#include <string>
#include <string_view>

namespace gpusentinel {

// Shortest decimal text that parses back to exactly the same double.
std::string format_exact(double value);

// Fixed-point text with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

// Strict decimal parse of the whole (already trimmed) field. Returns false on
// empty input, trailing junk, or non-finite values.
bool parse_double(std::string_view text, double& out);
bool parse_int64(std::string_view text, long long& out);

std::string_view trim(std::string_view text);

}  // namespace gpusentinel
