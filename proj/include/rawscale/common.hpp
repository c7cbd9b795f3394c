#pragma once

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace rawscale {

// Contract violations (bad shapes, invalid arguments). CLI maps these to exit 1.
struct contract_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// File / format problems. CLI maps these to exit 2.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string strfmt(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw contract_error(msg);
}

// Fixed numeric formatting for console/CSV output: 6 significant digits.
inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
}

} // namespace rawscale
