#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace fbas {

/// Decimal rendering with 12 significant digits, the precision of every
/// persisted number. NaN renders as "nan".
inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// The value a number takes after a write/read cycle at persisted precision.
inline double quantize(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

}  // namespace fbas
