#pragma once

#include <vector>

#include "rawscale/kernels.hpp"
#include "rawscale/tensor.hpp"

namespace rawscale {

// Haar normalization. Orthonormal (scale 1/2 both ways) conserves energy per
// level; "average" makes A the plain mean of each 2x2 block (analysis 1/4,
// synthesis 1).
enum class HaarNorm { orthonormal, average };

template <typename T>
constexpr T haar_analysis_scale(HaarNorm n) {
    return n == HaarNorm::orthonormal ? T(0.5) : T(0.25);
}
template <typename T>
constexpr T haar_synthesis_scale(HaarNorm n) {
    return n == HaarNorm::orthonormal ? T(0.5) : T(1);
}

template <typename T>
struct Bands {
    Tensor<T> A, V, H, D;
};

template <typename T>
Bands<T> split_bands(const Tensor<T>& stacked) {
    require(stacked.c % 4 == 0, "split_bands: channels must be a multiple of 4");
    int c = stacked.c / 4;
    size_t plane = (size_t)stacked.h * stacked.w * c;
    Bands<T> b;
    Tensor<T>* out[4] = {&b.A, &b.V, &b.H, &b.D};
    for (int i = 0; i < 4; ++i) {
        *out[i] = Tensor<T>(c, stacked.h, stacked.w);
        std::copy(stacked.data.begin() + i * plane, stacked.data.begin() + (i + 1) * plane, out[i]->data.begin());
    }
    return b;
}

template <typename T>
Tensor<T> stack_bands(const Bands<T>& b) {
    require(b.A.same_shape(b.V) && b.A.same_shape(b.H) && b.A.same_shape(b.D),
            "stack_bands: band shapes must match");
    Tensor<T> y(4 * b.A.c, b.A.h, b.A.w);
    size_t plane = b.A.data.size();
    const Tensor<T>* in[4] = {&b.A, &b.V, &b.H, &b.D};
    for (int i = 0; i < 4; ++i) std::copy(in[i]->data.begin(), in[i]->data.end(), y.data.begin() + i * plane);
    return y;
}

template <typename T>
Bands<T> dwt2d(const Tensor<T>& x, HaarNorm norm = HaarNorm::orthonormal) {
    return split_bands(dwt_stacked_fwd(x, haar_analysis_scale<T>(norm)));
}

template <typename T>
Tensor<T> idwt2d(const Bands<T>& b, HaarNorm norm = HaarNorm::orthonormal) {
    return idwt_stacked_fwd(stack_bands(b), haar_synthesis_scale<T>(norm));
}

template <typename T>
struct WaveletPyramid {
    std::vector<Bands<T>> levels; // levels[k-1] holds level k
};

template <typename T>
WaveletPyramid<T> dwt_pyramid(const Tensor<T>& x, int K, HaarNorm norm = HaarNorm::orthonormal) {
    require(K >= 1, "dwt_pyramid: K must be >= 1");
    int div = 1 << K;
    require(x.h % div == 0 && x.w % div == 0,
            strfmt("dwt_pyramid: dims %dx%d not divisible by 2^%d", x.h, x.w, K));
    WaveletPyramid<T> p;
    const Tensor<T>* cur = &x;
    for (int k = 0; k < K; ++k) {
        p.levels.push_back(dwt2d(*cur, norm));
        cur = &p.levels.back().A;
    }
    return p;
}

// Recursive synthesis: deepest A plus each level's details back to the image.
template <typename T>
Tensor<T> idwt_pyramid(const WaveletPyramid<T>& p, HaarNorm norm = HaarNorm::orthonormal) {
    require(!p.levels.empty(), "idwt_pyramid: empty pyramid");
    Tensor<T> a = p.levels.back().A;
    for (int k = (int)p.levels.size() - 1; k >= 0; --k) {
        Bands<T> b = p.levels[k];
        b.A = a;
        a = idwt2d(b, norm);
    }
    return a;
}

} // namespace rawscale
