#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace resalloc {

// Fixed 17-significant-digit rendering used for every number we emit, so
// artifacts are byte-stable across runs and platforms.
std::string format_number(double v);

inline nlohmann::json json_number(double v) { return format_number(v); }

// Accepts a JSON number or a decimal string produced by format_number.
double parse_number(const nlohmann::json& j);

}  // namespace resalloc
