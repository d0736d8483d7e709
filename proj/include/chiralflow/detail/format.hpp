#pragma once

#include <cstdio>
#include <string>

namespace chiralflow::detail {

/// Locale-independent, 17-significant-digit rendering used by every
/// emitted file.
inline std::string fmt17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

}  // namespace chiralflow::detail
