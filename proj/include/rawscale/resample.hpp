#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rawscale/rational.hpp"
#include "rawscale/tensor.hpp"

// Channel-independent classical resamplers. All use the align-corners-false
// source-coordinate convention src = (dst + 0.5) * (in/out) - 0.5 except
// `area`, which averages each destination cell's exact source footprint.

namespace rawscale {

enum class ResampleKernel { nearest, bilinear, bicubic, area, lanczos3 };

inline ResampleKernel parse_kernel(const std::string& s) {
    if (s == "nearest") return ResampleKernel::nearest;
    if (s == "bilinear") return ResampleKernel::bilinear;
    if (s == "bicubic") return ResampleKernel::bicubic;
    if (s == "area") return ResampleKernel::area;
    if (s == "lanczos3") return ResampleKernel::lanczos3;
    throw contract_error("unknown resample kernel '" + s + "'");
}

namespace detail {

struct Tap {
    int lo;                      // first source index
    std::vector<double> weights; // weights[i] applies to source lo+i (clamped)
};

inline double cubic_cr(double u) { // Catmull-Rom family, a = -0.5
    u = std::abs(u);
    if (u <= 1) return (1.5 * u - 2.5) * u * u + 1;
    if (u < 2) return ((-0.5 * u + 2.5) * u - 4) * u + 2;
    return 0;
}

inline double sinc(double u) {
    if (u == 0) return 1;
    double p = M_PI * u;
    return std::sin(p) / p;
}

inline std::vector<Tap> build_taps(int in, int out, ResampleKernel k) {
    std::vector<Tap> taps(out);
    double r = (double)in / out;
    for (int o = 0; o < out; ++o) {
        Tap& t = taps[o];
        switch (k) {
            case ResampleKernel::nearest: {
                double s = (o + 0.5) * r - 0.5;
                int i = (int)std::ceil(s - 0.5); // ties resolved toward the top-left source
                i = std::min(std::max(i, 0), in - 1);
                t.lo = i;
                t.weights = {1.0};
                break;
            }
            case ResampleKernel::bilinear: {
                double s = std::min(std::max((o + 0.5) * r - 0.5, 0.0), (double)(in - 1));
                int i0 = std::min((int)s, in - 1);
                double w1 = s - i0;
                t.lo = i0;
                t.weights = {1 - w1, w1};
                break;
            }
            case ResampleKernel::bicubic: {
                double s = (o + 0.5) * r - 0.5;
                int i = (int)std::floor(s);
                double f = s - i;
                t.lo = i - 1;
                t.weights.resize(4);
                double sum = 0;
                for (int j = 0; j < 4; ++j) {
                    t.weights[j] = cubic_cr(f + 1 - j);
                    sum += t.weights[j];
                }
                for (double& w : t.weights) w /= sum;
                break;
            }
            case ResampleKernel::area: {
                double a = o * r, b = (o + 1) * r;
                int i0 = (int)std::floor(a), i1 = (int)std::ceil(b);
                i1 = std::min(i1, in);
                t.lo = i0;
                double sum = 0;
                for (int i = i0; i < i1; ++i) {
                    double w = std::min(b, (double)i + 1) - std::max(a, (double)i);
                    t.weights.push_back(w);
                    sum += w;
                }
                for (double& w : t.weights) w /= sum;
                break;
            }
            case ResampleKernel::lanczos3: {
                double sc = std::max(r, 1.0); // stretch the kernel when minifying
                double s = (o + 0.5) * r - 0.5;
                int i0 = (int)std::ceil(s - 3 * sc);
                int i1 = (int)std::floor(s + 3 * sc);
                t.lo = i0;
                double sum = 0;
                for (int i = i0; i <= i1; ++i) {
                    double u = (i - s) / sc;
                    double w = std::abs(u) < 3 ? sinc(u) * sinc(u / 3) : 0.0;
                    t.weights.push_back(w);
                    sum += w;
                }
                for (double& w : t.weights) w /= sum;
                break;
            }
        }
    }
    return taps;
}

template <typename T>
Tensor<T> apply_taps_rows(const Tensor<T>& x, const std::vector<Tap>& taps) {
    // resample along height
    Tensor<T> y(x.c, (int)taps.size(), x.w);
    for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < y.h; ++oy) {
            const Tap& t = taps[oy];
            for (int ox = 0; ox < x.w; ++ox) {
                double acc = 0;
                for (size_t j = 0; j < t.weights.size(); ++j) {
                    int iy = std::min(std::max(t.lo + (int)j, 0), x.h - 1);
                    acc += t.weights[j] * (double)x.at(c, iy, ox);
                }
                y.at(c, oy, ox) = (T)acc;
            }
        }
    return y;
}

template <typename T>
Tensor<T> apply_taps_cols(const Tensor<T>& x, const std::vector<Tap>& taps) {
    Tensor<T> y(x.c, x.h, (int)taps.size());
    for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < x.h; ++oy)
            for (int ox = 0; ox < y.w; ++ox) {
                const Tap& t = taps[ox];
                double acc = 0;
                for (size_t j = 0; j < t.weights.size(); ++j) {
                    int ix = std::min(std::max(t.lo + (int)j, 0), x.w - 1);
                    acc += t.weights[j] * (double)x.at(c, oy, ix);
                }
                y.at(c, oy, ox) = (T)acc;
            }
    return y;
}

} // namespace detail

template <typename T>
Tensor<T> resample(const Tensor<T>& x, int oh, int ow, ResampleKernel k) {
    require(oh >= 1 && ow >= 1, "resample: output dims must be >= 1");
    auto ty = detail::build_taps(x.h, oh, k);
    auto tx = detail::build_taps(x.w, ow, k);
    return detail::apply_taps_cols(detail::apply_taps_rows(x, ty), tx);
}

// The baseline entry point: exact rational target dims.
template <typename T>
Tensor<T> interpolate_resample(const Tensor<T>& x, RationalScale sc, ResampleKernel k) {
    require(x.h * sc.n % sc.m == 0 && x.w * sc.n % sc.m == 0,
            strfmt("resample: dims %dx%d not integral under scale %d/%d", x.h, x.w, sc.n, sc.m));
    return resample(x, x.h * sc.n / sc.m, x.w * sc.n / sc.m, k);
}

template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& x, double sigma) {
    if (sigma <= 0) return x;
    int rad = (int)std::ceil(3 * sigma);
    std::vector<double> w(2 * rad + 1);
    double sum = 0;
    for (int i = -rad; i <= rad; ++i) {
        w[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += w[i + rad];
    }
    for (double& v : w) v /= sum;
    std::vector<detail::Tap> ty(x.h), tx(x.w);
    for (int i = 0; i < x.h; ++i) ty[i] = detail::Tap{i - rad, w};
    for (int i = 0; i < x.w; ++i) tx[i] = detail::Tap{i - rad, w};
    return detail::apply_taps_cols(detail::apply_taps_rows(x, ty), tx);
}

} // namespace rawscale
