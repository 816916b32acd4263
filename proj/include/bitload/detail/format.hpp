#pragma once

#include <cstdio>
#include <string>

namespace bitload::detail {

/// Shortest round-trippable decimal form; every numeric CSV cell goes through
/// this so reruns diff byte-identically.
inline std::string format_g17(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace bitload::detail
