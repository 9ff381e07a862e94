#pragma once

#include <cstdio>
#include <optional>
#include <string>

namespace cband {

/// Shortest-safe decimal rendering with 17 significant digits (round-trips exactly).
[[nodiscard]] inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[nodiscard]] inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

}  // namespace cband
