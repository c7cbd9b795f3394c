#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "rawscale/kernels.hpp"
#include "rawscale/tensor.hpp"

// Reverse-mode tape. Nodes own their value tensors; pulls are closures over
// node ids (never tensor references, the node vector may reallocate).

namespace rawscale {
namespace ad {

template <typename T>
class Tape;

template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Tensor<T>& val() const { return tape->nodes[id].val; }
};

template <typename T>
class Tape {
  public:
    struct Node {
        Tensor<T> val;
        Tensor<T> grad; // empty until some gradient flows here
        bool rg = false;
        std::function<void()> pull;
    };
    std::vector<Node> nodes;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> leaf(Tensor<T> v, bool requires_grad = false) {
        return push(std::move(v), requires_grad, nullptr, "leaf");
    }

    Var<T> push(Tensor<T> v, bool rg, std::function<void()> pull, const char* op) {
        if (!v.all_finite()) throw contract_error(std::string("non-finite values produced by ") + op);
        nodes.push_back(Node{std::move(v), Tensor<T>(), rg, rg ? std::move(pull) : nullptr});
        return Var<T>{this, (int)nodes.size() - 1};
    }

    int next_id() const { return (int)nodes.size(); }
    bool rg(int id) const { return nodes[id].rg; }
    const Tensor<T>& val(int id) const { return nodes[id].val; }

    Tensor<T>& grad_buf(int id) {
        Node& n = nodes[id];
        if (n.grad.data.empty()) n.grad = Tensor<T>(n.val.c, n.val.h, n.val.w, T(0));
        return n.grad;
    }
    bool has_grad(int id) const { return !nodes[id].grad.data.empty(); }
    const Tensor<T>& grad(int id) const { return nodes[id].grad; }

    void backward(Var<T> loss) {
        require(loss.tape == this && loss.id >= 0 && loss.id < (int)nodes.size(), "backward: bad loss var");
        require(nodes[loss.id].val.size() == 1, "backward: loss must be scalar");
        grad_buf(loss.id).data[0] = T(1);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes[i];
            if (!n.grad.data.empty() && n.pull) n.pull();
        }
        for (auto& n : nodes)
            if (!n.grad.data.empty() && !n.grad.all_finite())
                throw contract_error("non-finite gradient produced in backward");
    }
};

// ---- elementwise & reductions ----

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>* t = a.tape;
    require(a.val().same_shape(b.val()), "add: shape mismatch");
    Tensor<T> y = a.val();
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.val().data[i];
    bool rg = t->rg(a.id) || t->rg(b.id);
    int ai = a.id, bi = b.id, yi = t->next_id();
    return t->push(std::move(y), rg,
                   [t, ai, bi, yi] {
                       const Tensor<T>& g = t->grad(yi);
                       if (t->rg(ai)) {
                           auto& ga = t->grad_buf(ai);
                           for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                       }
                       if (t->rg(bi)) {
                           auto& gb = t->grad_buf(bi);
                           for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
                       }
                   },
                   "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    Tape<T>* t = a.tape;
    require(a.val().same_shape(b.val()), "subtract: shape mismatch");
    Tensor<T> y = a.val();
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] -= b.val().data[i];
    bool rg = t->rg(a.id) || t->rg(b.id);
    int ai = a.id, bi = b.id, yi = t->next_id();
    return t->push(std::move(y), rg,
                   [t, ai, bi, yi] {
                       const Tensor<T>& g = t->grad(yi);
                       if (t->rg(ai)) {
                           auto& ga = t->grad_buf(ai);
                           for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                       }
                       if (t->rg(bi)) {
                           auto& gb = t->grad_buf(bi);
                           for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
                       }
                   },
                   "subtract");
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>* t = a.tape;
    require(a.val().same_shape(b.val()), "multiply: shape mismatch");
    Tensor<T> y = a.val();
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= b.val().data[i];
    bool rg = t->rg(a.id) || t->rg(b.id);
    int ai = a.id, bi = b.id, yi = t->next_id();
    return t->push(std::move(y), rg,
                   [t, ai, bi, yi] {
                       const Tensor<T>& g = t->grad(yi);
                       if (t->rg(ai)) {
                           auto& ga = t->grad_buf(ai);
                           const Tensor<T>& bv = t->val(bi);
                           for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * bv.data[i];
                       }
                       if (t->rg(bi)) {
                           auto& gb = t->grad_buf(bi);
                           const Tensor<T>& av = t->val(ai);
                           for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * av.data[i];
                       }
                   },
                   "multiply");
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
    Tape<T>* t = a.tape;
    Tensor<T> y = a.val();
    for (T& v : y.data) v *= s;
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi, s] {
                       const Tensor<T>& g = t->grad(yi);
                       auto& ga = t->grad_buf(ai);
                       for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * s;
                   },
                   "scale");
}

// Subgradient at 0 is the negative-side slope.
template <typename T>
Var<T> leaky_relu(Var<T> a, T slope = T(0.2)) {
    Tape<T>* t = a.tape;
    Tensor<T> y = a.val();
    for (T& v : y.data) v = v > T(0) ? v : v * slope;
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi, slope] {
                       const Tensor<T>& g = t->grad(yi);
                       const Tensor<T>& x = t->val(ai);
                       auto& ga = t->grad_buf(ai);
                       for (size_t i = 0; i < g.data.size(); ++i)
                           ga.data[i] += g.data[i] * (x.data[i] > T(0) ? T(1) : slope);
                   },
                   "leaky_relu");
}

// Subgradient at 0 fixed to 0.
template <typename T>
Var<T> abs_v(Var<T> a) {
    Tape<T>* t = a.tape;
    Tensor<T> y = a.val();
    for (T& v : y.data) v = std::abs(v);
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi] {
                       const Tensor<T>& g = t->grad(yi);
                       const Tensor<T>& x = t->val(ai);
                       auto& ga = t->grad_buf(ai);
                       for (size_t i = 0; i < g.data.size(); ++i) {
                           T s = x.data[i] > T(0) ? T(1) : (x.data[i] < T(0) ? T(-1) : T(0));
                           ga.data[i] += g.data[i] * s;
                       }
                   },
                   "abs");
}

template <typename T>
Var<T> sum_all(Var<T> a) {
    Tape<T>* t = a.tape;
    T acc = T(0);
    for (T v : a.val().data) acc += v;
    Tensor<T> y(1, 1, 1, acc);
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi] {
                       T g = t->grad(yi).data[0];
                       auto& ga = t->grad_buf(ai);
                       for (T& v : ga.data) v += g;
                   },
                   "sum");
}

template <typename T>
Var<T> mean_all(Var<T> a) {
    Tape<T>* t = a.tape;
    T acc = T(0);
    for (T v : a.val().data) acc += v;
    T inv = T(1) / (T)a.val().size();
    Tensor<T> y(1, 1, 1, acc * inv);
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi, inv] {
                       T g = t->grad(yi).data[0] * inv;
                       auto& ga = t->grad_buf(ai);
                       for (T& v : ga.data) v += g;
                   },
                   "mean");
}

// Frobenius norm over all elements; subgradient at the origin fixed to 0.
template <typename T>
Var<T> frob_norm(Var<T> a) {
    Tape<T>* t = a.tape;
    double acc = 0;
    for (T v : a.val().data) acc += (double)v * v;
    T n = (T)std::sqrt(acc);
    Tensor<T> y(1, 1, 1, n);
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi] {
                       T n = t->val(yi).data[0];
                       if (n == T(0)) {
                           t->grad_buf(ai); // subgradient at the origin: zeros, but defined
                           return;
                       }
                       T g = t->grad(yi).data[0] / n;
                       const Tensor<T>& x = t->val(ai);
                       auto& ga = t->grad_buf(ai);
                       for (size_t i = 0; i < x.data.size(); ++i) ga.data[i] += g * x.data[i];
                   },
                   "l2_norm");
}

// ---- shape ops ----

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
    Tape<T>* t = a.tape;
    require(a.val().h == b.val().h && a.val().w == b.val().w, "concat: spatial dims mismatch");
    const Tensor<T>&av = a.val(), &bv = b.val();
    Tensor<T> y(av.c + bv.c, av.h, av.w);
    std::copy(av.data.begin(), av.data.end(), y.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), y.data.begin() + av.data.size());
    bool rg = t->rg(a.id) || t->rg(b.id);
    int ai = a.id, bi = b.id, yi = t->next_id();
    size_t an = av.data.size();
    return t->push(std::move(y), rg,
                   [t, ai, bi, yi, an] {
                       const Tensor<T>& g = t->grad(yi);
                       if (t->rg(ai)) {
                           auto& ga = t->grad_buf(ai);
                           for (size_t i = 0; i < an; ++i) ga.data[i] += g.data[i];
                       }
                       if (t->rg(bi)) {
                           auto& gb = t->grad_buf(bi);
                           for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += g.data[an + i];
                       }
                   },
                   "concat");
}

template <typename T>
Var<T> narrow_channels(Var<T> a, int start, int count) {
    Tape<T>* t = a.tape;
    const Tensor<T>& av = a.val();
    require(start >= 0 && count >= 1 && start + count <= av.c, "narrow: channel range out of bounds");
    Tensor<T> y(count, av.h, av.w);
    size_t plane = (size_t)av.h * av.w;
    std::copy(av.data.begin() + start * plane, av.data.begin() + (start + count) * plane, y.data.begin());
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi, start, plane] {
                       const Tensor<T>& g = t->grad(yi);
                       auto& ga = t->grad_buf(ai);
                       for (size_t i = 0; i < g.data.size(); ++i) ga.data[start * plane + i] += g.data[i];
                   },
                   "narrow");
}

template <typename T>
Var<T> pixel_unshuffle(Var<T> a, int r) {
    Tape<T>* t = a.tape;
    Tensor<T> y = pixel_unshuffle_fwd(a.val(), r);
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi, r] {
                       Tensor<T> g = pixel_shuffle_fwd(t->grad(yi), r);
                       auto& ga = t->grad_buf(ai);
                       for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                   },
                   "pixel_unshuffle");
}

template <typename T>
Var<T> pixel_shuffle(Var<T> a, int r) {
    Tape<T>* t = a.tape;
    Tensor<T> y = pixel_shuffle_fwd(a.val(), r);
    int ai = a.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(ai),
                   [t, ai, yi, r] {
                       Tensor<T> g = pixel_unshuffle_fwd(t->grad(yi), r);
                       auto& ga = t->grad_buf(ai);
                       for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                   },
                   "pixel_shuffle");
}

// ---- conv ----

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, const ConvSpec& spec) {
    Tape<T>* t = x.tape;
    require(spec.bias == (b.id >= 0), "conv2d: bias var does not match spec");
    Tensor<T> y = conv2d_fwd(x.val(), w.val(), spec.bias ? &b.val() : nullptr, spec);
    bool rg = t->rg(x.id) || t->rg(w.id) || (spec.bias && t->rg(b.id));
    int xi = x.id, wi = w.id, bi = b.id, yi = t->next_id();
    return t->push(std::move(y), rg,
                   [t, xi, wi, bi, yi, spec] {
                       const Tensor<T>& g = t->grad(yi);
                       Tensor<T>* gx = t->rg(xi) ? &t->grad_buf(xi) : nullptr;
                       Tensor<T>* gw = t->rg(wi) ? &t->grad_buf(wi) : nullptr;
                       Tensor<T>* gb = (spec.bias && t->rg(bi)) ? &t->grad_buf(bi) : nullptr;
                       conv2d_bwd(t->val(xi), t->val(wi), spec, g, gx, gw, gb);
                   },
                   "conv2d");
}

// ---- wavelet butterflies (channel-stacked [A|V|H|D]) ----

template <typename T>
Var<T> dwt_stacked(Var<T> x, T analysis_scale) {
    Tape<T>* t = x.tape;
    Tensor<T> y = dwt_stacked_fwd(x.val(), analysis_scale);
    int xi = x.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(xi),
                   [t, xi, yi, analysis_scale] {
                       Tensor<T> g = idwt_stacked_fwd(t->grad(yi), analysis_scale);
                       auto& gx = t->grad_buf(xi);
                       for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
                   },
                   "dwt2d");
}

template <typename T>
Var<T> idwt_stacked(Var<T> x, T synthesis_scale) {
    Tape<T>* t = x.tape;
    Tensor<T> y = idwt_stacked_fwd(x.val(), synthesis_scale);
    int xi = x.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(xi),
                   [t, xi, yi, synthesis_scale] {
                       Tensor<T> g = dwt_stacked_fwd(t->grad(yi), synthesis_scale);
                       auto& gx = t->grad_buf(xi);
                       for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
                   },
                   "idwt2d");
}

// ---- resize / attention pieces ----

template <typename T>
Var<T> bilinear_resize(Var<T> x, int oh, int ow) {
    Tape<T>* t = x.tape;
    Tensor<T> y = bilinear_fwd(x.val(), oh, ow);
    int xi = x.id, yi = t->next_id();
    int ih = x.val().h, iw = x.val().w;
    return t->push(std::move(y), t->rg(xi),
                   [t, xi, yi, ih, iw] { bilinear_bwd(ih, iw, t->grad(yi), t->grad_buf(xi)); },
                   "bilinear_resize");
}

template <typename T>
Var<T> softmax_rows(Var<T> x) {
    Tape<T>* t = x.tape;
    Tensor<T> y = softmax_rows_fwd(x.val());
    int xi = x.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(xi),
                   [t, xi, yi] {
                       const Tensor<T>&g = t->grad(yi), &y = t->val(yi);
                       auto& gx = t->grad_buf(xi);
                       for (int c = 0; c < y.c; ++c)
                           for (int r = 0; r < y.h; ++r) {
                               size_t off = ((size_t)c * y.h + r) * y.w;
                               T dot = T(0);
                               for (int i = 0; i < y.w; ++i) dot += g.data[off + i] * y.data[off + i];
                               for (int i = 0; i < y.w; ++i)
                                   gx.data[off + i] += y.data[off + i] * (g.data[off + i] - dot);
                           }
                   },
                   "softmax_rows");
}

// Row vectors scaled to unit length, smoothed as r / sqrt(|r|^2 + eps^2) so
// the op stays differentiable for degenerate rows.
template <typename T>
Var<T> l2_normalize_rows(Var<T> x) {
    Tape<T>* t = x.tape;
    const T eps = (T)1e-12;
    const Tensor<T>& xv = x.val();
    Tensor<T> y(xv.c, xv.h, xv.w);
    for (int c = 0; c < xv.c; ++c)
        for (int r = 0; r < xv.h; ++r) {
            size_t off = ((size_t)c * xv.h + r) * xv.w;
            double s = (double)eps * eps;
            for (int i = 0; i < xv.w; ++i) s += (double)xv.data[off + i] * xv.data[off + i];
            T inv = (T)(1.0 / std::sqrt(s));
            for (int i = 0; i < xv.w; ++i) y.data[off + i] = xv.data[off + i] * inv;
        }
    int xi = x.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(xi),
                   [t, xi, yi, eps] {
                       const Tensor<T>&g = t->grad(yi), &x = t->val(xi);
                       auto& gx = t->grad_buf(xi);
                       for (int c = 0; c < x.c; ++c)
                           for (int r = 0; r < x.h; ++r) {
                               size_t off = ((size_t)c * x.h + r) * x.w;
                               double s = (double)eps * eps;
                               for (int i = 0; i < x.w; ++i) s += (double)x.data[off + i] * x.data[off + i];
                               double inv = 1.0 / std::sqrt(s);
                               double dot = 0;
                               for (int i = 0; i < x.w; ++i) dot += (double)g.data[off + i] * x.data[off + i];
                               double inv3 = inv * inv * inv;
                               for (int i = 0; i < x.w; ++i)
                                   gx.data[off + i] += (T)(inv * g.data[off + i] - inv3 * dot * x.data[off + i]);
                           }
                   },
                   "l2_normalize_rows");
}

template <typename T>
Var<T> channel_matmul(Var<T> a, Var<T> b) {
    Tape<T>* t = a.tape;
    Tensor<T> y = channel_matmul_fwd(a.val(), b.val());
    bool rg = t->rg(a.id) || t->rg(b.id);
    int ai = a.id, bi = b.id, yi = t->next_id();
    return t->push(std::move(y), rg,
                   [t, ai, bi, yi] {
                       const Tensor<T>& g = t->grad(yi);
                       const Tensor<T>&av = t->val(ai), &bv = t->val(bi);
                       // y = a.b : ga += g.b^T, gb += a^T.g (per channel)
                       if (t->rg(ai)) {
                           auto& ga = t->grad_buf(ai);
                           for (int c = 0; c < av.c; ++c)
                               for (int i = 0; i < av.h; ++i)
                                   for (int k = 0; k < av.w; ++k) {
                                       T acc = T(0);
                                       const T* gr = g.plane(c) + (size_t)i * g.w;
                                       const T* br = bv.plane(c) + (size_t)k * bv.w;
                                       for (int j = 0; j < g.w; ++j) acc += gr[j] * br[j];
                                       ga.at(c, i, k) += acc;
                                   }
                       }
                       if (t->rg(bi)) {
                           auto& gb = t->grad_buf(bi);
                           for (int c = 0; c < av.c; ++c)
                               for (int k = 0; k < bv.h; ++k)
                                   for (int i = 0; i < av.h; ++i) {
                                       T a_ik = av.at(c, i, k);
                                       if (a_ik == T(0)) continue;
                                       const T* gr = g.plane(c) + (size_t)i * g.w;
                                       T* gbr = gb.plane(c) + (size_t)k * gb.w;
                                       for (int j = 0; j < g.w; ++j) gbr[j] += a_ik * gr[j];
                                   }
                       }
                   },
                   "channel_matmul");
}

template <typename T>
Var<T> transpose_hw(Var<T> x) {
    Tape<T>* t = x.tape;
    Tensor<T> y = transpose_hw_fwd(x.val());
    int xi = x.id, yi = t->next_id();
    return t->push(std::move(y), t->rg(xi),
                   [t, xi, yi] {
                       Tensor<T> g = transpose_hw_fwd(t->grad(yi));
                       auto& gx = t->grad_buf(xi);
                       for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
                   },
                   "transpose");
}

// Selection indices are constants of the backward pass; gradient flows to the
// kept entries only. Reports the kept/dropped |value| margin via *margin_out.
template <typename T>
Var<T> select_top_rows(Var<T> x, int keep, TopAxis axis, double* margin_out = nullptr) {
    Tape<T>* t = x.tape;
    Tensor<T> y;
    auto sel = std::make_shared<std::vector<int>>();
    double margin = select_top_fwd(x.val(), keep, axis, y, *sel);
    if (margin_out) *margin_out = std::min(*margin_out, margin);
    int xi = x.id, yi = t->next_id();
    int other = axis == TopAxis::vertical ? x.val().w : x.val().h;
    return t->push(std::move(y), t->rg(xi),
                   [t, xi, yi, keep, axis, sel, other] {
                       const Tensor<T>& g = t->grad(yi);
                       auto& gx = t->grad_buf(xi);
                       for (int c = 0; c < gx.c; ++c)
                           for (int gidx = 0; gidx < other; ++gidx) {
                               const int* sg = sel->data() + ((size_t)c * other + gidx) * keep;
                               for (int j = 0; j < keep; ++j) {
                                   if (axis == TopAxis::vertical)
                                       gx.at(c, sg[j], gidx) += g.at(c, j, gidx);
                                   else
                                       gx.at(c, gidx, sg[j]) += g.at(c, gidx, j);
                               }
                           }
                   },
                   "select_top_rows");
}

} // namespace ad
} // namespace rawscale
