#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace puree::csv {

/// printf-style %.<digits>g; non-finite values become "nan".
inline std::string number(double v, int digits = 9) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

}  // namespace puree::csv
