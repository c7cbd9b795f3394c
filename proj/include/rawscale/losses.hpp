#pragma once

#include "rawscale/model.hpp"
#include "rawscale/wavelet.hpp"

namespace rawscale {

struct LossReport {
    double con = 0, hwc = 0, em = 0, total = 0;
};

inline double total_loss(double l_con, double l_hwc, double l_em, double lambda_em) {
    require(lambda_em >= 0, "loss: lambda_em must be >= 0");
    return (l_con + l_hwc) + lambda_em * l_em;
}

template <typename T>
struct LossVars {
    ad::Var<T> con, hwc, em, total;
};

// Mean absolute difference against the reference LR mosaic.
template <typename T>
ad::Var<T> loss_content(Ctx<T>& ctx, const WrrdOut<T>& out, const Tensor<T>& lr_ref) {
    require(out.lr.val().same_shape(lr_ref), "loss: prediction/reference shape mismatch");
    return ad::mean_all(ad::abs_v(ad::sub(out.lr, ctx.tape.leaf(lr_ref))));
}

// Per-coefficient L1 across every band of every level, against the wavelet
// pyramid of the reference LR mosaic.
template <typename T>
ad::Var<T> loss_coeffs(Ctx<T>& ctx, const WrrdOut<T>& out, const WaveletPyramid<T>& lr_pyr) {
    require(lr_pyr.levels.size() == out.levels.size(), "loss: pyramid depth mismatch");
    ad::Var<T> acc{};
    bool first = true;
    for (size_t k = 0; k < out.levels.size(); ++k) {
        const LevelState<T>& st = out.levels[k];
        const Bands<T>& gt = lr_pyr.levels[k];
        const ad::Var<T> preds[4] = {st.A4, st.V, st.H, st.D};
        const Tensor<T>* refs[4] = {&gt.A, &gt.V, &gt.H, &gt.D};
        for (int b = 0; b < 4; ++b) {
            require(preds[b].val().same_shape(*refs[b]),
                    strfmt("loss: band shape mismatch at level %d", (int)k + 1));
            auto term = ad::mean_all(ad::abs_v(ad::sub(preds[b], ctx.tape.leaf(*refs[b]))));
            acc = first ? term : ad::add(acc, term);
            first = false;
        }
    }
    return acc;
}

// Energy alignment of predicted detail bands with the detail bands of the HR
// pyramid: |  ||pred||_F - ||hr||_F  | per band, normalized by the HR band
// pixel count (or by the predicted band's when lr_dims is set).
template <typename T>
ad::Var<T> loss_energy(Ctx<T>& ctx, const WrrdOut<T>& out, const WaveletPyramid<T>& hr_pyr,
                       bool lr_dims = false) {
    require(hr_pyr.levels.size() == out.levels.size(), "loss: pyramid depth mismatch");
    ad::Var<T> acc{};
    bool first = true;
    for (size_t k = 0; k < out.levels.size(); ++k) {
        const LevelState<T>& st = out.levels[k];
        const Bands<T>& gt = hr_pyr.levels[k];
        const ad::Var<T> preds[3] = {st.V, st.H, st.D};
        const Tensor<T>* refs[3] = {&gt.V, &gt.H, &gt.D};
        for (int b = 0; b < 3; ++b) {
            const Tensor<T>& pv = preds[b].val();
            double npix = lr_dims ? double(pv.h) * pv.w : double(refs[b]->h) * refs[b]->w;
            auto diff = ad::abs_v(ad::sub(ad::frob_norm(preds[b]), ad::frob_norm(ctx.tape.leaf(*refs[b]))));
            auto term = ad::scale(diff, T(1.0 / npix));
            acc = first ? term : ad::add(acc, term);
            first = false;
        }
    }
    return acc;
}

template <typename T>
LossVars<T> compute_losses(Ctx<T>& ctx, const WrrdOut<T>& out, const Tensor<T>& lr_ref,
                           const WaveletPyramid<T>& lr_pyr, const WaveletPyramid<T>& hr_pyr,
                           double lambda_em, bool em_lr_dims = false) {
    LossVars<T> lv;
    lv.con = loss_content(ctx, out, lr_ref);
    lv.hwc = loss_coeffs(ctx, out, lr_pyr);
    lv.em = loss_energy(ctx, out, hr_pyr, em_lr_dims);
    // association pinned: (con + hwc) + lambda * em
    lv.total = ad::add(ad::add(lv.con, lv.hwc), ad::scale(lv.em, T(lambda_em)));
    return lv;
}

template <typename T>
LossReport loss_report(const LossVars<T>& lv, double lambda_em) {
    LossReport r;
    r.con = lv.con.val().data[0];
    r.hwc = lv.hwc.val().data[0];
    r.em = lv.em.val().data[0];
    r.total = total_loss(r.con, r.hwc, r.em, lambda_em);
    return r;
}

} // namespace rawscale
