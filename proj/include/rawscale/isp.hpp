#pragma once

#include <cmath>
#include <fstream>
#include <string>

#include "rawscale/tensor.hpp"

// A fixed, deterministic ISP: half-size demosaic (averaging the two greens),
// white balance, CCM, transfer curve. No denoising, no tone mapping.

namespace rawscale {

struct IspConfig {
    double wb[3] = {1, 1, 1};
    double ccm[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    enum class Transfer { srgb, gamma } transfer = Transfer::srgb;
    double gamma = 2.2; // used when transfer == gamma
};

inline double srgb_oetf(double v) {
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline TensorF isp_render(const TensorF& packed, const IspConfig& cfg = IspConfig{}) {
    require(packed.c == 4, "isp_render: expected 4-channel packed input");
    TensorF out(3, packed.h, packed.w);
    auto clamp01 = [](double v) { return std::min(std::max(v, 0.0), 1.0); };
    for (int y = 0; y < packed.h; ++y)
        for (int x = 0; x < packed.w; ++x) {
            double rgb[3] = {
                clamp01(packed.at(0, y, x) * cfg.wb[0]),
                clamp01(0.5 * ((double)packed.at(1, y, x) + packed.at(2, y, x)) * cfg.wb[1]),
                clamp01(packed.at(3, y, x) * cfg.wb[2]),
            };
            for (int i = 0; i < 3; ++i) {
                double v = cfg.ccm[i][0] * rgb[0] + cfg.ccm[i][1] * rgb[1] + cfg.ccm[i][2] * rgb[2];
                v = clamp01(v);
                v = cfg.transfer == IspConfig::Transfer::srgb ? srgb_oetf(v) : std::pow(v, 1.0 / cfg.gamma);
                out.at(i, y, x) = (float)v;
            }
        }
    return out;
}

// Binary PPM (P6), maxval 255, rounding half-up.
inline void write_ppm(const std::string& path, const TensorF& rgb) {
    require(rgb.c == 3, "write_ppm: expected 3 channels");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("ppm: cannot open for write: " + path);
    os << "P6\n" << rgb.w << " " << rgb.h << "\n255\n";
    for (int y = 0; y < rgb.h; ++y)
        for (int x = 0; x < rgb.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::min(std::max((double)rgb.at(c, y, x), 0.0), 1.0);
                unsigned char b = (unsigned char)std::floor(v * 255.0 + 0.5);
                os.write(reinterpret_cast<const char*>(&b), 1);
            }
    if (!os) throw io_error("ppm: write failed: " + path);
}

} // namespace rawscale
