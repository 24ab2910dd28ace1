#pragma once

#include <cstdio>
#include <string>

namespace tdho::detail {

// Shortest round-trippable-ish column format shared by the CSV writers.
inline std::string g12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return std::string(buf);
}

} // namespace tdho::detail
