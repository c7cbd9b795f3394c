#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rawscale/tensor.hpp"

// Plain (tape-free) compute kernels. The autodiff layer wraps these for
// forward evaluation and implements the matching pulls.

namespace rawscale {

struct ConvSpec {
    int in_c = 0, out_c = 0, k = 3, stride = 1;
    bool bias = true;

    int pad() const { return k / 2; }
    int out_h(int h) const { return (h + 2 * pad() - k) / stride + 1; }
    int out_w(int w) const { return (w + 2 * pad() - k) / stride + 1; }
};

namespace detail {
inline int ceil_div_nonneg(int a, int s) { return a <= 0 ? 0 : (a + s - 1) / s; }
} // namespace detail

// Weights are stored as (out_c, in_c, k*k): one Tensor channel per output
// channel, one row per input channel, kernel taps flattened row-major.
template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, const ConvSpec& s) {
    require(x.c == s.in_c, strfmt("conv2d: input has %d channels, spec wants %d", x.c, s.in_c));
    require(w.c == s.out_c && w.h == s.in_c && w.w == s.k * s.k, "conv2d: weight shape mismatch");
    require(s.stride == 1 || s.stride == 2, "conv2d: stride must be 1 or 2");
    require(s.k % 2 == 1, "conv2d: kernel size must be odd");
    if (b) require(b->c == s.out_c && b->h == 1 && b->w == 1, "conv2d: bias shape mismatch");
    int pad = s.pad(), oh = s.out_h(x.h), ow = s.out_w(x.w);
    require(oh >= 1 && ow >= 1, "conv2d: empty output");
    Tensor<T> y(s.out_c, oh, ow);
    for (int oc = 0; oc < s.out_c; ++oc) {
        for (int ic = 0; ic < s.in_c; ++ic) {
            const T* xp = x.plane(ic);
            for (int ky = 0; ky < s.k; ++ky) {
                int oy_lo = std::max(0, detail::ceil_div_nonneg(pad - ky, s.stride));
                int ynum = x.h - 1 + pad - ky;
                int oy_hi = std::min(oh, ynum < 0 ? 0 : ynum / s.stride + 1);
                for (int kx = 0; kx < s.k; ++kx) {
                    T wv = w.at(oc, ic, ky * s.k + kx);
                    if (wv == T(0)) continue;
                    int ox_lo = std::max(0, detail::ceil_div_nonneg(pad - kx, s.stride));
                    int xnum = x.w - 1 + pad - kx;
                    int ox_hi = std::min(ow, xnum < 0 ? 0 : xnum / s.stride + 1);
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        int iy = oy * s.stride - pad + ky;
                        const T* xrow = xp + (size_t)iy * x.w;
                        T* yrow = y.plane(oc) + (size_t)oy * ow;
                        int ix = ox_lo * s.stride - pad + kx;
                        for (int ox = ox_lo; ox < ox_hi; ++ox, ix += s.stride) yrow[ox] += wv * xrow[ix];
                    }
                }
            }
        }
        if (b) {
            T bv = b->data[oc];
            T* yp = y.plane(oc);
            for (size_t i = 0; i < (size_t)oh * ow; ++i) yp[i] += bv;
        }
    }
    return y;
}

template <typename T>
void conv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& s, const Tensor<T>& gy,
                Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
    int pad = s.pad(), oh = gy.h, ow = gy.w;
    for (int oc = 0; oc < s.out_c; ++oc) {
        for (int ic = 0; ic < s.in_c; ++ic) {
            const T* xp = x.plane(ic);
            T* gxp = gx ? gx->plane(ic) : nullptr;
            for (int ky = 0; ky < s.k; ++ky) {
                int oy_lo = std::max(0, detail::ceil_div_nonneg(pad - ky, s.stride));
                int ynum = x.h - 1 + pad - ky;
                int oy_hi = std::min(oh, ynum < 0 ? 0 : ynum / s.stride + 1);
                for (int kx = 0; kx < s.k; ++kx) {
                    T wv = w.at(oc, ic, ky * s.k + kx);
                    T gwv = T(0);
                    int ox_lo = std::max(0, detail::ceil_div_nonneg(pad - kx, s.stride));
                    int xnum = x.w - 1 + pad - kx;
                    int ox_hi = std::min(ow, xnum < 0 ? 0 : xnum / s.stride + 1);
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        int iy = oy * s.stride - pad + ky;
                        const T* xrow = xp + (size_t)iy * x.w;
                        T* gxrow = gxp ? gxp + (size_t)iy * x.w : nullptr;
                        const T* grow = gy.plane(oc) + (size_t)oy * ow;
                        int ix = ox_lo * s.stride - pad + kx;
                        for (int ox = ox_lo; ox < ox_hi; ++ox, ix += s.stride) {
                            T g = grow[ox];
                            gwv += g * xrow[ix];
                            if (gxrow) gxrow[ix] += g * wv;
                        }
                    }
                    if (gw) gw->at(oc, ic, ky * s.k + kx) += gwv;
                }
            }
        }
        if (gb) {
            T acc = T(0);
            const T* gp = gy.plane(oc);
            for (size_t i = 0; i < (size_t)oh * ow; ++i) acc += gp[i];
            gb->data[oc] += acc;
        }
    }
}

// Space-to-depth. Output channel index = c*r^2 + dy*r + dx: the original
// channel varies slowest, the in-block offset fastest.
template <typename T>
Tensor<T> pixel_unshuffle_fwd(const Tensor<T>& x, int r) {
    require(r >= 1, "pixel_unshuffle: r must be >= 1");
    require(x.h % r == 0 && x.w % r == 0, strfmt("pixel_unshuffle: dims %dx%d not divisible by %d", x.h, x.w, r));
    Tensor<T> y(x.c * r * r, x.h / r, x.w / r);
    for (int c = 0; c < x.c; ++c)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                int oc = (c * r + dy) * r + dx;
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx) y.at(oc, yy, xx) = x.at(c, yy * r + dy, xx * r + dx);
            }
    return y;
}

template <typename T>
Tensor<T> pixel_shuffle_fwd(const Tensor<T>& x, int r) {
    require(r >= 1, "pixel_shuffle: r must be >= 1");
    require(x.c % (r * r) == 0, strfmt("pixel_shuffle: %d channels not divisible by %d", x.c, r * r));
    Tensor<T> y(x.c / (r * r), x.h * r, x.w * r);
    for (int c = 0; c < y.c; ++c)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                int ic = (c * r + dy) * r + dx;
                for (int yy = 0; yy < x.h; ++yy)
                    for (int xx = 0; xx < x.w; ++xx) y.at(c, yy * r + dy, xx * r + dx) = x.at(ic, yy, xx);
            }
    return y;
}

// One Haar level over all channels, bands stacked as [A | V | H | D] along
// channels. `s` is the analysis scale: 1/2 orthonormal, 1/4 "true average".
template <typename T>
Tensor<T> dwt_stacked_fwd(const Tensor<T>& x, T s) {
    require(x.h % 2 == 0 && x.w % 2 == 0, strfmt("dwt2d: dims %dx%d must be even", x.h, x.w));
    int hb = x.h / 2, wb = x.w / 2;
    Tensor<T> y(4 * x.c, hb, wb);
    for (int c = 0; c < x.c; ++c)
        for (int by = 0; by < hb; ++by)
            for (int bx = 0; bx < wb; ++bx) {
                T a = x.at(c, 2 * by, 2 * bx), b = x.at(c, 2 * by, 2 * bx + 1);
                T cc = x.at(c, 2 * by + 1, 2 * bx), d = x.at(c, 2 * by + 1, 2 * bx + 1);
                y.at(c, by, bx) = s * (a + b + cc + d);
                y.at(x.c + c, by, bx) = s * (a - b + cc - d);
                y.at(2 * x.c + c, by, bx) = s * (a + b - cc - d);
                y.at(3 * x.c + c, by, bx) = s * (a - b - cc + d);
            }
    return y;
}

// Inverse butterfly. `s` is the synthesis scale: 1/2 orthonormal, 1 average.
template <typename T>
Tensor<T> idwt_stacked_fwd(const Tensor<T>& y, T s) {
    require(y.c % 4 == 0, "idwt2d: channel count must be a multiple of 4");
    int c = y.c / 4;
    Tensor<T> x(c, y.h * 2, y.w * 2);
    for (int ci = 0; ci < c; ++ci)
        for (int by = 0; by < y.h; ++by)
            for (int bx = 0; bx < y.w; ++bx) {
                T A = y.at(ci, by, bx), V = y.at(c + ci, by, bx);
                T H = y.at(2 * c + ci, by, bx), D = y.at(3 * c + ci, by, bx);
                x.at(ci, 2 * by, 2 * bx) = s * (A + V + H + D);
                x.at(ci, 2 * by, 2 * bx + 1) = s * (A - V + H - D);
                x.at(ci, 2 * by + 1, 2 * bx) = s * (A + V - H - D);
                x.at(ci, 2 * by + 1, 2 * bx + 1) = s * (A - V - H + D);
            }
    return x;
}

// 1-D interpolation taps under the align-corners-false convention:
// src = (dst + 0.5) * (in/out) - 0.5, clamped to the valid range.
struct LinearTap {
    int i0, i1;
    double w1; // weight on i1; (1-w1) on i0
};

inline std::vector<LinearTap> linear_taps(int in, int out) {
    std::vector<LinearTap> taps(out);
    double r = (double)in / out;
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * r - 0.5;
        s = std::min(std::max(s, 0.0), (double)(in - 1));
        int i0 = std::min((int)s, in - 1);
        int i1 = std::min(i0 + 1, in - 1);
        taps[o] = LinearTap{i0, i1, s - i0};
    }
    return taps;
}

template <typename T>
Tensor<T> bilinear_fwd(const Tensor<T>& x, int oh, int ow) {
    require(oh >= 1 && ow >= 1, "bilinear_resize: output dims must be >= 1");
    auto ty = linear_taps(x.h, oh), tx = linear_taps(x.w, ow);
    Tensor<T> y(x.c, oh, ow);
    for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < oh; ++oy) {
            const LinearTap& a = ty[oy];
            for (int ox = 0; ox < ow; ++ox) {
                const LinearTap& b = tx[ox];
                double v00 = x.at(c, a.i0, b.i0), v01 = x.at(c, a.i0, b.i1);
                double v10 = x.at(c, a.i1, b.i0), v11 = x.at(c, a.i1, b.i1);
                double top = v00 + (v01 - v00) * b.w1, bot = v10 + (v11 - v10) * b.w1;
                y.at(c, oy, ox) = (T)(top + (bot - top) * a.w1);
            }
        }
    return y;
}

template <typename T>
void bilinear_bwd(int in_h, int in_w, const Tensor<T>& gy, Tensor<T>& gx) {
    auto ty = linear_taps(in_h, gy.h), tx = linear_taps(in_w, gy.w);
    for (int c = 0; c < gy.c; ++c)
        for (int oy = 0; oy < gy.h; ++oy) {
            const LinearTap& a = ty[oy];
            for (int ox = 0; ox < gy.w; ++ox) {
                const LinearTap& b = tx[ox];
                double g = gy.at(c, oy, ox);
                gx.at(c, a.i0, b.i0) += (T)(g * (1 - a.w1) * (1 - b.w1));
                gx.at(c, a.i0, b.i1) += (T)(g * (1 - a.w1) * b.w1);
                gx.at(c, a.i1, b.i0) += (T)(g * a.w1 * (1 - b.w1));
                gx.at(c, a.i1, b.i1) += (T)(g * a.w1 * b.w1);
            }
        }
}

// Rows (the last axis, per channel) as the softmax groups.
template <typename T>
Tensor<T> softmax_rows_fwd(const Tensor<T>& x) {
    Tensor<T> y(x.c, x.h, x.w);
    for (int c = 0; c < x.c; ++c)
        for (int r = 0; r < x.h; ++r) {
            const T* xr = x.plane(c) + (size_t)r * x.w;
            T* yr = y.plane(c) + (size_t)r * x.w;
            T mx = xr[0];
            for (int i = 1; i < x.w; ++i) mx = std::max(mx, xr[i]);
            T sum = T(0);
            for (int i = 0; i < x.w; ++i) {
                yr[i] = std::exp(xr[i] - mx);
                sum += yr[i];
            }
            for (int i = 0; i < x.w; ++i) yr[i] /= sum;
        }
    return y;
}

// Per-channel matrix product: a (c,p,q) x b (c,q,s) -> (c,p,s).
template <typename T>
Tensor<T> channel_matmul_fwd(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.c == b.c, "channel_matmul: channel count mismatch");
    require(a.w == b.h, strfmt("channel_matmul: inner dims %d vs %d", a.w, b.h));
    Tensor<T> y(a.c, a.h, b.w);
    for (int c = 0; c < a.c; ++c)
        for (int i = 0; i < a.h; ++i) {
            T* yr = y.plane(c) + (size_t)i * b.w;
            for (int k = 0; k < a.w; ++k) {
                T av = a.at(c, i, k);
                if (av == T(0)) continue;
                const T* br = b.plane(c) + (size_t)k * b.w;
                for (int j = 0; j < b.w; ++j) yr[j] += av * br[j];
            }
        }
    return y;
}

template <typename T>
Tensor<T> transpose_hw_fwd(const Tensor<T>& x) {
    Tensor<T> y(x.c, x.w, x.h);
    for (int c = 0; c < x.c; ++c)
        for (int i = 0; i < x.h; ++i)
            for (int j = 0; j < x.w; ++j) y.at(c, j, i) = x.at(c, i, j);
    return y;
}

enum class TopAxis { vertical, horizontal }; // vertical keeps rows per column, horizontal keeps columns per row

// Keeps the `keep` largest-|value| entries per column (vertical) or per row
// (horizontal), order preserved, ties resolved toward the lower index.
// sel[g*keep + j] is the source index of output slot j in group g (groups are
// (channel, column) pairs for vertical, (channel, row) pairs for horizontal).
// Returns the selection margin: the smallest gap between a kept |value| and a
// dropped one (infinity when nothing is dropped).
template <typename T>
double select_top_fwd(const Tensor<T>& x, int keep, TopAxis axis, Tensor<T>& y, std::vector<int>& sel) {
    int extent = axis == TopAxis::vertical ? x.h : x.w;
    int other = axis == TopAxis::vertical ? x.w : x.h;
    require(keep >= 1 && keep <= extent, strfmt("select_top_rows: keep=%d out of range 1..%d", keep, extent));
    y = axis == TopAxis::vertical ? Tensor<T>(x.c, keep, x.w) : Tensor<T>(x.c, x.h, keep);
    sel.assign((size_t)x.c * other * keep, 0);
    std::vector<int> order(extent);
    double margin = std::numeric_limits<double>::infinity();
    for (int c = 0; c < x.c; ++c)
        for (int g = 0; g < other; ++g) {
            auto val = [&](int i) {
                return axis == TopAxis::vertical ? x.at(c, i, g) : x.at(c, g, i);
            };
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
                return std::abs((double)val(i)) > std::abs((double)val(j));
            });
            if (keep < extent) {
                double kept_min = std::abs((double)val(order[keep - 1]));
                double drop_max = std::abs((double)val(order[keep]));
                margin = std::min(margin, kept_min - drop_max);
            }
            std::sort(order.begin(), order.begin() + keep);
            int* sg = sel.data() + ((size_t)c * other + g) * keep;
            for (int j = 0; j < keep; ++j) {
                sg[j] = order[j];
                if (axis == TopAxis::vertical)
                    y.at(c, j, g) = val(order[j]);
                else
                    y.at(c, g, j) = val(order[j]);
            }
        }
    return margin;
}

} // namespace rawscale
