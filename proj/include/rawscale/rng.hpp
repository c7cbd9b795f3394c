#pragma once

#include <cmath>
#include <cstdint>

namespace rawscale {

// splitmix64: tiny, fast, and bit-identical on every platform. We avoid
// <random> distributions because their output sequences are
// implementation-defined and we promise byte-stable data files.
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1) with 53 bits of mantissa
    double uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo,hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (one value per call; cached pair dropped
    // deliberately so the stream is a pure function of call index)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

// Stateless mix of several words into a fresh seed (for per-iteration,
// per-lane sampling that survives checkpoint/resume).
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c = 0) {
    Rng r(a * 0x9e3779b97f4a7c15ull + b * 0xd1b54a32d192ed03ull + c * 0x94d049bb133111ebull + 1ull);
    return r.next_u64();
}

} // namespace rawscale
