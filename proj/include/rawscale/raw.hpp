#pragma once

#include <vector>

#include "rawscale/rational.hpp"
#include "rawscale/tensor.hpp"

namespace rawscale {

// A mosaiced sensor frame, RGGB: (0,0)=R (0,1)=G1 (1,0)=G2 (1,1)=B.
struct BayerFrame {
    int width = 0, height = 0;
    std::vector<float> samples; // row-major, sensor units
    float black_level = 64.0f, white_level = 1023.0f;

    float& at(int y, int x) { return samples[(size_t)y * width + x]; }
    float at(int y, int x) const { return samples[(size_t)y * width + x]; }
};

// 4-channel half-resolution packing, channels ordered R, G1, G2, B,
// normalized to [0,1].
inline TensorF pack_bayer(const BayerFrame& f) {
    require(f.width % 2 == 0 && f.height % 2 == 0, "pack_bayer: dims must be even");
    require(f.white_level > f.black_level, "pack_bayer: white_level must exceed black_level");
    require((int)f.samples.size() == f.width * f.height, "pack_bayer: sample count mismatch");
    TensorF p(4, f.height / 2, f.width / 2);
    float inv = 1.0f / (f.white_level - f.black_level);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) {
            auto norm = [&](int yy, int xx) {
                float v = (f.at(yy, xx) - f.black_level) * inv;
                return std::min(std::max(v, 0.0f), 1.0f);
            };
            p.at(0, y, x) = norm(2 * y, 2 * x);
            p.at(1, y, x) = norm(2 * y, 2 * x + 1);
            p.at(2, y, x) = norm(2 * y + 1, 2 * x);
            p.at(3, y, x) = norm(2 * y + 1, 2 * x + 1);
        }
    return p;
}

// Inverse site mapping; output stays in normalized units (black=0, white=1).
inline BayerFrame unpack_bayer(const TensorF& p) {
    require(p.c == 4, "unpack_bayer: expected 4 channels");
    BayerFrame f;
    f.width = p.w * 2;
    f.height = p.h * 2;
    f.black_level = 0.0f;
    f.white_level = 1.0f;
    f.samples.resize((size_t)f.width * f.height);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) {
            f.at(2 * y, 2 * x) = p.at(0, y, x);
            f.at(2 * y, 2 * x + 1) = p.at(1, y, x);
            f.at(2 * y + 1, 2 * x) = p.at(2, y, x);
            f.at(2 * y + 1, 2 * x + 1) = p.at(3, y, x);
        }
    return f;
}

struct PairedSample {
    TensorF hr, lr; // packed
    RationalScale scale;
    uint64_t scene_seed = 0;
    double noise_sigma = 0;
    std::string lr_mode = "analytic"; // or "prefiltered"
};

} // namespace rawscale
