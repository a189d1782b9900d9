#include "numfmt.hpp"

#include "errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>

namespace resalloc {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  return fmt::format("{:.16e}", v);
}

double parse_number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') fail(ErrorCode::SchemaError, "not a decimal number: '" + s + "'");
    return v;
  }
  fail(ErrorCode::SchemaError, "expected a number");
}

}  // namespace resalloc
