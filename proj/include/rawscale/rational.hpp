#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "rawscale/common.hpp"

namespace rawscale {

// Downscale ratio: LR dims = HR dims * n / m, reduced, with n < m.
struct RationalScale {
    int n = 1, m = 2;

    bool operator==(const RationalScale& o) const { return n == o.n && m == o.m; }
    std::string str() const { return std::to_string(n) + "/" + std::to_string(m); }
    // stable token used in parameter names and file headers
    std::string key() const { return std::to_string(n) + "_" + std::to_string(m); }
};

inline RationalScale make_scale(int64_t n, int64_t m) {
    require(n >= 1 && m >= 1, "scale: numerator and denominator must be positive");
    int64_t g = std::gcd(n, m);
    n /= g;
    m /= g;
    require(n < m, "scale: downscale factor must be > 1 (n < m after reduction)");
    require(m <= 1 << 20, "scale: denominator too large");
    return RationalScale{(int)n, (int)m};
}

// Accepts a decimal factor ("1.3", "2") or an explicit fraction ("4/3"),
// interpreted exactly from its digits, then reduced. The factor is the
// downscale amount, so "1.3" -> 13/10 -> n=10, m=13.
inline RationalScale parse_scale(const std::string& text) {
    require(!text.empty(), "scale: empty string");
    auto slash = text.find('/');
    auto parse_int = [](const std::string& s) -> int64_t {
        require(!s.empty() && s.size() <= 9, "scale: bad integer part '" + s + "'");
        int64_t v = 0;
        for (char ch : s) {
            require(ch >= '0' && ch <= '9', "scale: non-numeric character in '" + s + "'");
            v = v * 10 + (ch - '0');
        }
        return v;
    };
    if (slash != std::string::npos) {
        int64_t a = parse_int(text.substr(0, slash));
        int64_t b = parse_int(text.substr(slash + 1));
        require(b > 0, "scale: zero denominator");
        // factor a/b > 1 downscale -> LR = HR * b/a
        return make_scale(b, a);
    }
    auto dot = text.find('.');
    int64_t whole = 0, frac = 0, denom = 1;
    if (dot == std::string::npos) {
        whole = parse_int(text);
    } else {
        whole = dot == 0 ? 0 : parse_int(text.substr(0, dot));
        std::string fs = text.substr(dot + 1);
        require(!fs.empty(), "scale: trailing decimal point");
        frac = parse_int(fs);
        for (size_t i = 0; i < fs.size(); ++i) denom *= 10;
    }
    int64_t num = whole * denom + frac; // factor = num/denom
    return make_scale(denom, num);
}

} // namespace rawscale
