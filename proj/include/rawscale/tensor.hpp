#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rawscale/common.hpp"

namespace rawscale {

// Dense CHW tensor, row-major within each channel plane.
template <typename T>
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, T fill = T(0)) : c(c_), h(h_), w(w_) {
        require(c_ >= 0 && h_ >= 0 && w_ >= 0, "tensor dims must be non-negative");
        data.assign((size_t)c_ * h_ * w_, fill);
    }

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    T& at(int ci, int yi, int xi) { return data[((size_t)ci * h + yi) * w + xi]; }
    const T& at(int ci, int yi, int xi) const { return data[((size_t)ci * h + yi) * w + xi]; }

    T* plane(int ci) { return data.data() + (size_t)ci * h * w; }
    const T* plane(int ci) const { return data.data() + (size_t)ci * h * w; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(c, h, w);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = (U)data[i];
        return out;
    }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite((double)v)) return false;
        return true;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs((double)a.data[i] - (double)b.data[i]));
    return m;
}

} // namespace rawscale
