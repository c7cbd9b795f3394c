#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rawscale/losses.hpp"
#include "rawscale/model.hpp"
#include "rawscale/synth.hpp"

namespace rawscale {

inline double rel_err(double a, double n, double floor_ = 1e-4) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor_});
}

// ---- per-primitive finite-difference harness (double, central, h=1e-5) ----

using GraphFn =
    std::function<ad::Var<double>(ad::Tape<double>&, std::vector<ad::Var<double>>&)>;

inline double fd_max_rel(const GraphFn& fn, std::vector<TensorD> inputs, double h = 1e-5,
                         double floor_ = 1e-4) {
    auto eval = [&](const std::vector<TensorD>& xs) {
        ad::Tape<double> tape;
        std::vector<ad::Var<double>> vars;
        vars.reserve(xs.size());
        for (const auto& x : xs) vars.push_back(tape.leaf(x, false));
        return fn(tape, vars).val().data[0];
    };
    std::vector<TensorD> an;
    {
        ad::Tape<double> tape;
        std::vector<ad::Var<double>> vars;
        for (const auto& x : inputs) vars.push_back(tape.leaf(x, true));
        auto loss = fn(tape, vars);
        require(loss.val().size() == 1, "fd: graph must produce a scalar");
        tape.backward(loss);
        for (auto& v : vars)
            an.push_back(tape.has_grad(v.id) ? tape.grad(v.id)
                                             : TensorD(v.val().c, v.val().h, v.val().w, 0.0));
    }
    double worst = 0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        for (size_t j = 0; j < inputs[i].data.size(); ++j) {
            double save = inputs[i].data[j];
            inputs[i].data[j] = save + h;
            double fp = eval(inputs);
            inputs[i].data[j] = save - h;
            double fm = eval(inputs);
            inputs[i].data[j] = save;
            worst = std::max(worst, rel_err(an[i].data[j], (fp - fm) / (2 * h), floor_));
        }
    }
    return worst;
}

struct PrimCheck {
    std::string name;
    double max_rel = 0;
};

namespace detail {

inline TensorD rand_t(Rng& rng, int c, int h, int w, double lo = -1, double hi = 1) {
    TensorD t(c, h, w);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// magnitudes in [0.2, 1.0] with random sign: clear of the |x| and lrelu kinks
inline TensorD rand_signed(Rng& rng, int c, int h, int w) {
    TensorD t(c, h, w);
    for (double& v : t.data) v = rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
    return t;
}

// per-group distinct magnitudes so top-value selection is stable under h
inline TensorD rand_spread(Rng& rng, int c, int h, int w, TopAxis axis) {
    TensorD t(c, h, w);
    int groups = axis == TopAxis::vertical ? w : h;
    int glen = axis == TopAxis::vertical ? h : w;
    for (int ch = 0; ch < c; ++ch)
        for (int g = 0; g < groups; ++g) {
            std::vector<double> mag(glen);
            for (int i = 0; i < glen; ++i) mag[i] = 0.2 + 0.15 * i;
            for (int i = glen - 1; i > 0; --i)
                std::swap(mag[i], mag[(int)(rng.next_u64() % (uint64_t)(i + 1))]);
            for (int i = 0; i < glen; ++i) {
                double v = mag[i] * (rng.uniform() < 0.5 ? -1 : 1);
                if (axis == TopAxis::vertical)
                    t.at(ch, i, g) = v;
                else
                    t.at(ch, g, i) = v;
            }
        }
    return t;
}

} // namespace detail

// Every differentiable primitive, finite-differenced on small kink-safe
// inputs. Scalar reduction = sum(weights * y) with fixed random weights.
inline std::vector<PrimCheck> primitive_grad_checks(uint64_t seed = 7) {
    Rng rng(mix_seed(seed, 0xfd));
    std::vector<PrimCheck> out;
    auto weighted = [](TensorD w) {
        auto wp = std::make_shared<TensorD>(std::move(w));
        return [wp](ad::Tape<double>& t, ad::Var<double> y) {
            return ad::sum_all(ad::mul(t.leaf(*wp), y));
        };
    };
    auto run = [&](const std::string& name, const GraphFn& fn, std::vector<TensorD> inputs) {
        out.push_back(PrimCheck{name, fd_max_rel(fn, std::move(inputs))});
    };

    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 4));
        run("add", [w](ad::Tape<double>& t, auto& v) { return w(t, ad::add(v[0], v[1])); },
            {detail::rand_t(rng, 2, 3, 4), detail::rand_t(rng, 2, 3, 4)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 4));
        run("sub", [w](ad::Tape<double>& t, auto& v) { return w(t, ad::sub(v[0], v[1])); },
            {detail::rand_t(rng, 2, 3, 4), detail::rand_t(rng, 2, 3, 4)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 4));
        run("mul", [w](ad::Tape<double>& t, auto& v) { return w(t, ad::mul(v[0], v[1])); },
            {detail::rand_t(rng, 2, 3, 4), detail::rand_t(rng, 2, 3, 4)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 4));
        run("scale", [w](ad::Tape<double>& t, auto& v) { return w(t, ad::scale(v[0], 0.37)); },
            {detail::rand_t(rng, 2, 3, 4)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 4, 4));
        run("leaky_relu", [w](ad::Tape<double>& t, auto& v) { return w(t, ad::leaky_relu(v[0])); },
            {detail::rand_signed(rng, 2, 4, 4)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 4, 4));
        run("abs", [w](ad::Tape<double>& t, auto& v) { return w(t, ad::abs_v(v[0])); },
            {detail::rand_signed(rng, 2, 4, 4)});
    }
    run("sum", [](ad::Tape<double>&, auto& v) { return ad::sum_all(v[0]); },
        {detail::rand_t(rng, 2, 3, 5)});
    run("mean", [](ad::Tape<double>&, auto& v) { return ad::mean_all(v[0]); },
        {detail::rand_t(rng, 2, 3, 5)});
    run("frobenius_norm", [](ad::Tape<double>&, auto& v) { return ad::frob_norm(v[0]); },
        {detail::rand_signed(rng, 2, 3, 5)});
    {
        auto w = weighted(detail::rand_t(rng, 5, 3, 4));
        run("concat_channels",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::concat_channels(v[0], v[1])); },
            {detail::rand_t(rng, 2, 3, 4), detail::rand_t(rng, 3, 3, 4)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 4));
        run("narrow_channels",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::narrow_channels(v[0], 1, 2)); },
            {detail::rand_t(rng, 4, 3, 4)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 8, 2, 3));
        run("pixel_unshuffle",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::pixel_unshuffle(v[0], 2)); },
            {detail::rand_t(rng, 2, 4, 6)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 4, 6));
        run("pixel_shuffle",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::pixel_shuffle(v[0], 2)); },
            {detail::rand_t(rng, 8, 2, 3)});
    }
    {
        ConvSpec s{2, 3, 3, 1, true};
        auto w = weighted(detail::rand_t(rng, 3, 5, 5));
        run("conv2d",
            [w, s](ad::Tape<double>& t, auto& v) { return w(t, ad::conv2d(v[0], v[1], v[2], s)); },
            {detail::rand_t(rng, 2, 5, 5), detail::rand_t(rng, 3, 2, 9), detail::rand_t(rng, 3, 1, 1)});
    }
    {
        ConvSpec s{2, 3, 3, 2, true};
        auto w = weighted(detail::rand_t(rng, 3, 3, 3));
        run("conv2d_stride2",
            [w, s](ad::Tape<double>& t, auto& v) { return w(t, ad::conv2d(v[0], v[1], v[2], s)); },
            {detail::rand_t(rng, 2, 6, 6), detail::rand_t(rng, 3, 2, 9), detail::rand_t(rng, 3, 1, 1)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 8, 2, 3));
        run("dwt2",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::dwt_stacked(v[0], 0.5)); },
            {detail::rand_t(rng, 2, 4, 6)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 4, 6));
        run("idwt2",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::idwt_stacked(v[0], 0.5)); },
            {detail::rand_t(rng, 8, 2, 3)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 6, 7));
        run("bilinear_up",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::bilinear_resize(v[0], 6, 7)); },
            {detail::rand_t(rng, 2, 4, 5)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 4));
        run("bilinear_down",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::bilinear_resize(v[0], 3, 4)); },
            {detail::rand_t(rng, 2, 6, 8)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 5));
        run("softmax_rows",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::softmax_rows(v[0])); },
            {detail::rand_t(rng, 2, 3, 5)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 5));
        run("l2_normalize_rows",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::l2_normalize_rows(v[0])); },
            {detail::rand_signed(rng, 2, 3, 5)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 3, 5));
        run("channel_matmul",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::channel_matmul(v[0], v[1])); },
            {detail::rand_t(rng, 2, 3, 4), detail::rand_t(rng, 2, 4, 5)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 5, 3));
        run("transpose_hw",
            [w](ad::Tape<double>& t, auto& v) { return w(t, ad::transpose_hw(v[0])); },
            {detail::rand_t(rng, 2, 3, 5)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 2, 4));
        run("select_top_vertical",
            [w](ad::Tape<double>& t, auto& v) {
                return w(t, ad::select_top_rows(v[0], 2, TopAxis::vertical));
            },
            {detail::rand_spread(rng, 2, 4, 4, TopAxis::vertical)});
    }
    {
        auto w = weighted(detail::rand_t(rng, 2, 4, 2));
        run("select_top_horizontal",
            [w](ad::Tape<double>& t, auto& v) {
                return w(t, ad::select_top_rows(v[0], 2, TopAxis::horizontal));
            },
            {detail::rand_spread(rng, 2, 4, 4, TopAxis::horizontal)});
    }
    return out;
}

// ---- whole-model check ----

struct ModelGradCheck {
    int coords = 0;
    int passed = 0;
    double max_rel = 0;
    double mean_rel = 0;
    double frac = 0;
    double topk_margin = 0;
    int attempts = 1;
    bool pass = false;
};

// Random parameter coordinates of a double-precision model vs central
// differences of the total loss. Scenes whose top-value selections sit
// within `margin_min` of a tie are rejected and redrawn (the selection is
// piecewise-smooth; a boundary crossing under +-h would poison the check).
inline ModelGradCheck grad_check_model(const ModelConfig& mcfg, RationalScale sc, int hr_h, int hr_w,
                                       int n_coords = 500, uint64_t seed = 1, bool corrupt = false,
                                       double fd_h = 1e-5, double tol = 1e-4, double margin_min = 1e-3) {
    ModelGradCheck rep;
    TensorD hr, lr;
    ParamStore<double> ps;
    double lambda = 0.1;
    for (int attempt = 0;; ++attempt) {
        require(attempt < 64, "gradcheck: no margin-safe scene found in 64 attempts");
        rep.attempts = attempt + 1;
        uint64_t s = mix_seed(seed, (uint64_t)attempt, 0x6c);
        PairedSample pair = generate_synthetic_pair(s, hr_h, hr_w, sc, 0.0);
        hr = pair.hr.cast<double>();
        lr = pair.lr.cast<double>();
        ps = build_params<double>(mcfg, s);
        ForwardStats stats;
        ad::Tape<double> tape;
        Ctx<double> ctx{tape, ps, false, &stats, {}};
        model_downscale(ctx, tape.leaf(hr), sc, mcfg);
        rep.topk_margin = stats.min_topk_margin;
        bool uses_select = mcfg.hfpm_mode == ModelConfig::HfpmMode::learned;
        if (!uses_select || stats.min_topk_margin >= margin_min) break;
    }
    auto lr_pyr = dwt_pyramid(lr, mcfg.K, mcfg.wavelet);
    auto hr_pyr = dwt_pyramid(hr, mcfg.K, mcfg.wavelet);
    auto loss_of = [&](bool train, std::map<std::string, TensorD>* grads_out) {
        ad::Tape<double> tape;
        Ctx<double> ctx{tape, ps, train, nullptr, {}};
        auto out = model_downscale(ctx, tape.leaf(hr), sc, mcfg);
        auto lv = compute_losses(ctx, out, lr, lr_pyr, hr_pyr, lambda, false);
        double v = lv.total.val().data[0];
        if (grads_out) {
            tape.backward(lv.total);
            for (const auto& [name, var] : ctx.leaves)
                if (tape.has_grad(var.id)) (*grads_out)[name] = tape.grad(var.id);
        }
        return v;
    };
    std::map<std::string, TensorD> grads;
    loss_of(true, &grads);

    size_t total = ps.total_size();
    size_t want = std::min((size_t)n_coords, total);
    Rng pick(mix_seed(seed, 0xc0));
    std::set<size_t> chosen;
    while (chosen.size() < want) chosen.insert((size_t)(pick.next_u64() % (uint64_t)total));

    std::vector<size_t> starts(ps.entries.size());
    size_t acc = 0;
    for (size_t i = 0; i < ps.entries.size(); ++i) {
        starts[i] = acc;
        acc += ps.entries[i].value.size();
    }
    double sum_rel = 0;
    bool first_coord = true;
    for (size_t flat : chosen) {
        size_t ei = (size_t)(std::upper_bound(starts.begin(), starts.end(), flat) - starts.begin()) - 1;
        size_t off = flat - starts[ei];
        auto& entry = ps.entries[ei];
        double a = 0;
        auto git = grads.find(entry.name);
        if (git != grads.end()) a = git->second.data[off];
        if (corrupt && first_coord) a += 0.05;
        first_coord = false;
        double save = entry.value.data[off];
        entry.value.data[off] = save + fd_h;
        double fp = loss_of(false, nullptr);
        entry.value.data[off] = save - fd_h;
        double fm = loss_of(false, nullptr);
        entry.value.data[off] = save;
        double r = rel_err(a, (fp - fm) / (2 * fd_h), 1e-4);
        sum_rel += r;
        rep.max_rel = std::max(rep.max_rel, r);
        if (r <= tol) rep.passed++;
        rep.coords++;
    }
    rep.mean_rel = rep.coords ? sum_rel / rep.coords : 0;
    rep.frac = rep.coords ? (double)rep.passed / rep.coords : 0;
    rep.pass = rep.frac >= 0.99;
    return rep;
}

} // namespace rawscale
