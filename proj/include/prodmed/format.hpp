#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace prodmed {

/// Locale-independent shortest-round-trip-ish rendering used by every text output
/// (12 significant digits; "nan" / "inf" spelled out).
[[nodiscard]] inline std::string format_number(double x, int digits = 12) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

}  // namespace prodmed
