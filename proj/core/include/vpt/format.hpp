#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vpt {

/// Shortest decimal that parses back to the same double; NaN is "NaN", infinities "inf"/"-inf".
std::string format_double(double value);

/// Fixed-point with `digits` fractional digits.
std::string format_fixed(double value, int digits);

/// Strict parse of a whole field; accepts the spellings format_double emits.
/// Returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);

std::vector<std::string_view> split(std::string_view line, char sep);

}  // namespace vpt
