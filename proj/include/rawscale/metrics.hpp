#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "rawscale/tensor.hpp"

namespace rawscale {

// Peak 1.0. MSE of 0 yields +infinity; use psnr_table_value for reports.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), "psnr: shape mismatch");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = (double)a.data[i] - (double)b.data[i];
        mse += d * d;
    }
    mse /= (double)a.data.size();
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

inline double psnr_table_value(double p) { return std::min(p, 99.0); }

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1. Valid window positions only, averaged over channels.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), "ssim: shape mismatch");
    const int win = 11, rad = win / 2;
    require(a.h >= win && a.w >= win, strfmt("ssim: image %dx%d smaller than %dx%d window", a.h, a.w, win, win));
    double kern[win];
    double ksum = 0;
    for (int i = 0; i < win; ++i) {
        double d = i - rad;
        kern[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
        ksum += kern[i];
    }
    for (double& k : kern) k /= ksum;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    long count = 0;
    std::vector<double> w2d(win * win);
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) w2d[i * win + j] = kern[i] * kern[j];
    for (int ch = 0; ch < a.c; ++ch)
        for (int y = rad; y < a.h - rad; ++y)
            for (int x = rad; x < a.w - rad; ++x) {
                double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        double w = w2d[i * win + j];
                        double pa = a.at(ch, y + i - rad, x + j - rad);
                        double pb = b.at(ch, y + i - rad, x + j - rad);
                        ma += w * pa;
                        mb += w * pb;
                        va += w * pa * pa;
                        vb += w * pb * pb;
                        cov += w * (pa * pb); // association keeps ssim(a,b) == ssim(b,a) bitwise
                    }
                va -= ma * ma;
                vb -= mb * mb;
                cov -= ma * mb;
                double s = ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                total += s;
                ++count;
            }
    return total / (double)count;
}

} // namespace rawscale
