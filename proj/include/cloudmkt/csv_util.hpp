#pragma once

#include <cstdio>
#include <string>

namespace cloudmkt::csv {

/// Shortest round-trippable-ish decimal form, stable across runs.
inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string flag(bool b) { return b ? "true" : "false"; }

}  // namespace cloudmkt::csv
