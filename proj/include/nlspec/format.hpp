#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace nlspec {

/// Shortest decimal text that parses back to the same double ("inf", "-inf",
/// "nan" for non-finite values).
inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

}  // namespace nlspec
