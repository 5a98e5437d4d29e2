#pragma once

#include <cstdio>
#include <string>

namespace ddtd {

// printf-style number formatting; independent of the global C++ locale.
inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string fmt_g6(double v) { return fmt("%.6g", v); }
inline std::string fmt_db(double v) { return fmt("%.2f", v); }

}  // namespace ddtd
