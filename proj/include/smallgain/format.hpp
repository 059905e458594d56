#pragma once

#include <charconv>
#include <string>

namespace smallgain {

// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace smallgain
