#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rawscale/autodiff.hpp"
#include "rawscale/params.hpp"
#include "rawscale/rational.hpp"
#include "rawscale/wavelet.hpp"

namespace rawscale {

struct ModelConfig {
    int K = 4;
    int c_base = 16;
    int enc_blocks = 2;       // ResBlocks per encoder level
    int lasdm_pre_blocks = 2; // before pixel_unshuffle
    int lasdm_post_blocks = 2;// after, split around the merge projection
    int hfpm_pre_blocks = 2;  // per-direction, before selection
    int hfpm_post_blocks = 2; // per-direction, after the attention products
    int head_kernel = 3;

    enum class LasdmMode { learned, bilinear } lasdm_mode = LasdmMode::learned;
    enum class HfpmMode { learned, cnn_bilinear } hfpm_mode = HfpmMode::learned;
    HaarNorm wavelet = HaarNorm::orthonormal;

    // Scales the parameter set supports. More than one entry enables the
    // (experimental) mixed-scale mode: LASDM branches are duplicated per
    // scale, everything else is shared.
    std::vector<RationalScale> scales = {RationalScale{1, 2}};

    int wavelet_levels() const { return K; }
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json scales = nlohmann::json::array();
    for (auto s : c.scales) scales.push_back({{"n", s.n}, {"m", s.m}});
    return nlohmann::json{
        {"K", c.K},
        {"c_base", c.c_base},
        {"enc_blocks", c.enc_blocks},
        {"lasdm_pre_blocks", c.lasdm_pre_blocks},
        {"lasdm_post_blocks", c.lasdm_post_blocks},
        {"hfpm_pre_blocks", c.hfpm_pre_blocks},
        {"hfpm_post_blocks", c.hfpm_post_blocks},
        {"head_kernel", c.head_kernel},
        {"lasdm_mode", c.lasdm_mode == ModelConfig::LasdmMode::learned ? "learned" : "bilinear"},
        {"hfpm_mode", c.hfpm_mode == ModelConfig::HfpmMode::learned ? "learned" : "cnn_bilinear"},
        {"wavelet", c.wavelet == HaarNorm::orthonormal ? "orthonormal" : "average"},
        {"scales", scales},
    };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        if (j.contains("K")) c.K = j["K"].get<int>();
        if (j.contains("c_base")) c.c_base = j["c_base"].get<int>();
        if (j.contains("enc_blocks")) c.enc_blocks = j["enc_blocks"].get<int>();
        if (j.contains("lasdm_pre_blocks")) c.lasdm_pre_blocks = j["lasdm_pre_blocks"].get<int>();
        if (j.contains("lasdm_post_blocks")) c.lasdm_post_blocks = j["lasdm_post_blocks"].get<int>();
        if (j.contains("hfpm_pre_blocks")) c.hfpm_pre_blocks = j["hfpm_pre_blocks"].get<int>();
        if (j.contains("hfpm_post_blocks")) c.hfpm_post_blocks = j["hfpm_post_blocks"].get<int>();
        if (j.contains("head_kernel")) c.head_kernel = j["head_kernel"].get<int>();
        if (j.contains("lasdm_mode")) {
            std::string s = j["lasdm_mode"].get<std::string>();
            require(s == "learned" || s == "bilinear", "config: lasdm_mode must be learned|bilinear");
            c.lasdm_mode = s == "learned" ? ModelConfig::LasdmMode::learned : ModelConfig::LasdmMode::bilinear;
        }
        if (j.contains("hfpm_mode")) {
            std::string s = j["hfpm_mode"].get<std::string>();
            require(s == "learned" || s == "cnn_bilinear", "config: hfpm_mode must be learned|cnn_bilinear");
            c.hfpm_mode = s == "learned" ? ModelConfig::HfpmMode::learned : ModelConfig::HfpmMode::cnn_bilinear;
        }
        if (j.contains("wavelet")) {
            std::string s = j["wavelet"].get<std::string>();
            require(s == "orthonormal" || s == "average", "config: wavelet must be orthonormal|average");
            c.wavelet = s == "orthonormal" ? HaarNorm::orthonormal : HaarNorm::average;
        }
        if (j.contains("scales")) {
            c.scales.clear();
            for (const auto& e : j["scales"]) {
                if (e.is_string())
                    c.scales.push_back(parse_scale(e.get<std::string>()));
                else
                    c.scales.push_back(make_scale(e.at("n").get<int>(), e.at("m").get<int>()));
            }
            require(!c.scales.empty(), "config: scales must be non-empty");
        }
    } catch (const nlohmann::json::exception& e) {
        throw contract_error(std::string("config: malformed model section: ") + e.what());
    }
    require(c.K >= 1 && c.K <= 5, "config: K must be in 1..5");
    require(c.c_base >= 1, "config: c_base must be >= 1");
    require(c.head_kernel % 2 == 1 && c.head_kernel >= 1, "config: head_kernel must be odd");
    return c;
}

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash(const nlohmann::json& j) {
    return strfmt("%016llx", (unsigned long long)fnv1a64(j.dump()));
}

// ---- parameter registration (order defines the serialization layout) ----

template <typename T>
ParamStore<T> build_params(const ModelConfig& cfg, uint64_t seed) {
    ParamStore<T> ps;
    Rng rng(mix_seed(seed, 0x1417));
    int c = cfg.c_base;
    auto rb = [&](const std::string& prefix, int ch) {
        ps.register_conv(rng, prefix + ".c0", ConvSpec{ch, ch, 3, 1, true});
        ps.register_conv(rng, prefix + ".c1", ConvSpec{ch, ch, 3, 1, true});
    };
    ps.register_conv(rng, "enc.stem", ConvSpec{4, c, 3, 1, true});
    for (int k = 1; k <= cfg.K; ++k) {
        if (k > 1) ps.register_conv(rng, strfmt("enc.l%d.down", k), ConvSpec{c, c, 3, 2, true});
        for (int i = 0; i < cfg.enc_blocks; ++i) rb(strfmt("enc.l%d.rb%d", k, i), c);
    }
    for (int k = 1; k <= cfg.K; ++k) {
        for (auto sc : cfg.scales) {
            std::string lp = strfmt("lv%d.lasdm.s%s", k, sc.key().c_str());
            for (int i = 0; i < cfg.lasdm_pre_blocks; ++i) rb(lp + strfmt(".pre%d", i), c);
            if (cfg.lasdm_mode == ModelConfig::LasdmMode::learned) {
                int ca = c * sc.m * sc.m, cb = c * sc.n * sc.n;
                int na = cfg.lasdm_post_blocks / 2, nb = cfg.lasdm_post_blocks - na;
                for (int i = 0; i < na; ++i) rb(lp + strfmt(".mga%d", i), ca);
                ps.register_conv(rng, lp + ".proj", ConvSpec{ca, cb, 1, 1, true});
                for (int i = 0; i < nb; ++i) rb(lp + strfmt(".mgb%d", i), cb);
            } else {
                for (int i = 0; i < cfg.lasdm_post_blocks; ++i) rb(lp + strfmt(".post%d", i), c);
            }
        }
        std::string hp = strfmt("lv%d.hfpm", k);
        for (const char* d : {"V", "H", "D"})
            for (int i = 0; i < cfg.hfpm_pre_blocks; ++i) rb(hp + strfmt(".pre%s%d", d, i), c);
        if (cfg.hfpm_mode == ModelConfig::HfpmMode::learned) {
            for (const char* n : {"qh", "kh", "qv", "kv"})
                ps.register_conv(rng, hp + "." + n, ConvSpec{c, c, 1, 1, true});
            for (const char* d : {"V", "H", "D"})
                for (int i = 0; i < cfg.hfpm_post_blocks; ++i) rb(hp + strfmt(".post%s%d", d, i), c);
            for (const char* d : {"V", "H", "D"})
                ps.register_conv(rng, hp + ".res" + std::string(d), ConvSpec{c, 4, 1, 1, true});
        }
        for (const char* d : {"V", "H", "D"})
            ps.register_conv(rng, hp + ".head" + std::string(d), ConvSpec{c, 4, cfg.head_kernel, 1, true});
        ps.register_conv(rng, strfmt("lv%d.proj", k), ConvSpec{c, 4, 1, 1, true});
        if (k < cfg.K) ps.register_conv(rng, strfmt("lv%d.fuse", k), ConvSpec{c + 4, c, 1, 1, true});
    }
    return ps;
}

// ---- forward ----

struct ForwardStats {
    int location_map_evals = 0;
    double min_topk_margin = std::numeric_limits<double>::infinity();
};

template <typename T>
struct Ctx {
    ad::Tape<T>& tape;
    ParamStore<T>& ps;
    bool train = false;
    ForwardStats* stats = nullptr;
    std::map<std::string, ad::Var<T>> leaves;

    ad::Var<T> P(const std::string& name) {
        auto it = leaves.find(name);
        if (it != leaves.end()) return it->second;
        ad::Var<T> v = tape.leaf(ps.at(name).value, train);
        leaves.emplace(name, v);
        return v;
    }

    ad::Var<T> conv(ad::Var<T> x, const std::string& prefix, const ConvSpec& spec) {
        ad::Var<T> b{};
        if (spec.bias) b = P(prefix + ".b");
        return ad::conv2d(x, P(prefix + ".w"), b, spec);
    }

    ad::Var<T> resblock(ad::Var<T> x, const std::string& prefix) {
        int ch = x.val().c;
        ConvSpec s{ch, ch, 3, 1, true};
        auto h = this->conv(x, prefix + ".c0", s);
        h = ad::leaky_relu(h);
        h = this->conv(h, prefix + ".c1", s);
        return ad::add(x, h);
    }
};

template <typename T>
std::vector<ad::Var<T>> encode_pyramid(Ctx<T>& ctx, ad::Var<T> x, const ModelConfig& cfg, RationalScale sc) {
    const Tensor<T>& xv = x.val();
    require(xv.c == 4, "encode: packed input must have 4 channels");
    int div = (1 << cfg.K) * sc.m;
    require(xv.h % div == 0 && xv.w % div == 0,
            strfmt("input dims %dx%d must be divisible by 2^K*m = %d; run crop-valid first", xv.h, xv.w, div));
    int c = cfg.c_base;
    std::vector<ad::Var<T>> f;
    ad::Var<T> cur = ctx.conv(x, "enc.stem", ConvSpec{4, c, 3, 1, true});
    for (int k = 1; k <= cfg.K; ++k) {
        if (k > 1) cur = ctx.conv(cur, strfmt("enc.l%d.down", k), ConvSpec{c, c, 3, 2, true});
        for (int i = 0; i < cfg.enc_blocks; ++i) cur = ctx.resblock(cur, strfmt("enc.l%d.rb%d", k, i));
        f.push_back(cur);
    }
    return f;
}

// Rational n/m rescale of the low-frequency band: unshuffle(m) -> channel
// merge -> shuffle(n). The bilinear mode is the substitution ablation.
template <typename T>
ad::Var<T> lasdm_forward(Ctx<T>& ctx, ad::Var<T> A, RationalScale sc, const ModelConfig& cfg, int level) {
    // copy dims up front: val() references don't survive later tape pushes
    int ac = A.val().c, ah = A.val().h, aw = A.val().w;
    require(ah % sc.m == 0 && aw % sc.m == 0,
            strfmt("lasdm: dims %dx%d not divisible by m=%d", ah, aw, sc.m));
    std::string lp = strfmt("lv%d.lasdm.s%s", level, sc.key().c_str());
    ad::Var<T> h = A;
    for (int i = 0; i < cfg.lasdm_pre_blocks; ++i) h = ctx.resblock(h, lp + strfmt(".pre%d", i));
    if (cfg.lasdm_mode == ModelConfig::LasdmMode::bilinear) {
        h = ad::bilinear_resize(h, ah * sc.n / sc.m, aw * sc.n / sc.m);
        for (int i = 0; i < cfg.lasdm_post_blocks; ++i) h = ctx.resblock(h, lp + strfmt(".post%d", i));
        return h;
    }
    h = ad::pixel_unshuffle(h, sc.m);
    int ca = ac * sc.m * sc.m, cb = ac * sc.n * sc.n;
    int na = cfg.lasdm_post_blocks / 2, nb = cfg.lasdm_post_blocks - na;
    for (int i = 0; i < na; ++i) h = ctx.resblock(h, lp + strfmt(".mga%d", i));
    h = ctx.conv(h, lp + ".proj", ConvSpec{ca, cb, 1, 1, true});
    for (int i = 0; i < nb; ++i) h = ctx.resblock(h, lp + strfmt(".mgb%d", i));
    return ad::pixel_shuffle(h, sc.n);
}

// Row-token cosine attention: queries/keys are the rows of the two feature
// maps within each channel; output rows are softmax-normalized.
template <typename T>
ad::Var<T> location_map_rows(Ctx<T>& ctx, ad::Var<T> q, ad::Var<T> k) {
    if (ctx.stats) ctx.stats->location_map_evals++;
    require(q.val().w == k.val().w, "location_map: token vector lengths differ");
    auto sim = ad::channel_matmul(ad::l2_normalize_rows(q), ad::transpose_hw(ad::l2_normalize_rows(k)));
    return ad::softmax_rows(sim);
}

template <typename T>
struct HfpmOut {
    ad::Var<T> V, H, D; // each (4, n*h'/m, n*w'/m)
};

template <typename T>
HfpmOut<T> hfpm_forward(Ctx<T>& ctx, ad::Var<T> z, ad::Var<T> Vb, ad::Var<T> Hb, ad::Var<T> Db,
                        RationalScale sc, const ModelConfig& cfg, int level) {
    const Tensor<T>& vv = Vb.val();
    require(vv.same_shape(Hb.val()) && vv.same_shape(Db.val()), "hfpm: detail band shapes differ");
    require(vv.h % sc.m == 0 && vv.w % sc.m == 0,
            strfmt("hfpm: band dims %dx%d not divisible by m=%d", vv.h, vv.w, sc.m));
    int c = vv.c;
    int th = vv.h * sc.n / sc.m, tw = vv.w * sc.n / sc.m;
    require(z.val().c == c && z.val().h == th && z.val().w == tw, "hfpm: low-frequency input shape mismatch");
    std::string hp = strfmt("lv%d.hfpm", level);

    ad::Var<T> Vp = Vb, Hp = Hb, Dp = Db;
    for (int i = 0; i < cfg.hfpm_pre_blocks; ++i) {
        Vp = ctx.resblock(Vp, hp + strfmt(".preV%d", i));
        Hp = ctx.resblock(Hp, hp + strfmt(".preH%d", i));
        Dp = ctx.resblock(Dp, hp + strfmt(".preD%d", i));
    }
    ConvSpec head{c, 4, cfg.head_kernel, 1, true};

    if (cfg.hfpm_mode == ModelConfig::HfpmMode::cnn_bilinear) {
        auto mk = [&](ad::Var<T> p, const char* d) {
            return ctx.conv(ad::bilinear_resize(p, th, tw), hp + ".head" + std::string(d), head);
        };
        return {mk(Vp, "V"), mk(Hp, "H"), mk(Dp, "D")};
    }

    double* margin = ctx.stats ? &ctx.stats->min_topk_margin : nullptr;
    // V' keeps the strongest rows per column, H' the strongest columns per row
    auto Vs = ad::select_top_rows(Vp, th, TopAxis::vertical, margin);   // (c, th, w')
    auto Hs = ad::select_top_rows(Hp, tw, TopAxis::horizontal, margin); // (c, h', tw)

    ConvSpec one{c, c, 1, 1, true};
    auto MH = location_map_rows(ctx, ctx.conv(z, hp + ".qh", one), ctx.conv(Hs, hp + ".kh", one)); // (c, th, h')
    auto Qv = ad::transpose_hw(ctx.conv(z, hp + ".qv", one));  // columns as tokens -> (c, tw, th)
    auto Kv = ad::transpose_hw(ctx.conv(Vs, hp + ".kv", one)); // (c, w', th)
    auto MV = location_map_rows(ctx, Qv, Kv);                  // (c, tw, w')
    auto MVt = ad::transpose_hw(MV);                           // (c, w', tw)

    auto Hh = ad::channel_matmul(MH, Hs);                          // (c, th, tw)
    auto Vh = ad::channel_matmul(Vs, MVt);                         // (c, th, tw)
    auto Dh = ad::channel_matmul(ad::channel_matmul(MH, Dp), MVt); // (c, th, tw)
    for (int i = 0; i < cfg.hfpm_post_blocks; ++i) {
        Vh = ctx.resblock(Vh, hp + strfmt(".postV%d", i));
        Hh = ctx.resblock(Hh, hp + strfmt(".postH%d", i));
        Dh = ctx.resblock(Dh, hp + strfmt(".postD%d", i));
    }
    ConvSpec res1{c, 4, 1, 1, true};
    auto finish = [&](ad::Var<T> x, ad::Var<T> raw, const char* d) {
        auto y = ctx.conv(x, hp + ".head" + std::string(d), head);
        auto r = ctx.conv(ad::bilinear_resize(raw, th, tw), hp + ".res" + std::string(d), res1);
        return ad::add(y, r);
    };
    return {finish(Vh, Vb, "V"), finish(Hh, Hb, "H"), finish(Dh, Db, "D")};
}

template <typename T>
struct LevelState {
    ad::Var<T> A4, V, H, D; // predicted LR wavelet coefficients, 4 channels each
    ad::Var<T> idwt;        // reconstruction fed to the next-finer level
    int hr_band_h = 0, hr_band_w = 0;
};

// Ground-truth substitution hook: when set, level k uses these coefficients
// instead of its predictions (levels[k-1], tensors must be 4-channel).
template <typename T>
struct ForcedCoeffs {
    std::vector<Bands<T>> levels;
};

template <typename T>
struct WrrdOut {
    ad::Var<T> lr; // unclamped; clamp only at export
    std::vector<LevelState<T>> levels;
};

template <typename T>
WrrdOut<T> wrrd_forward(Ctx<T>& ctx, const std::vector<ad::Var<T>>& pyr, RationalScale sc,
                        const ModelConfig& cfg, const ForcedCoeffs<T>* force = nullptr) {
    require((int)pyr.size() == cfg.K, "wrrd: pyramid level count mismatch");
    if (force) require((int)force->levels.size() == cfg.K, "wrrd: forced coefficient level count mismatch");
    T as = haar_analysis_scale<T>(cfg.wavelet), ss = haar_synthesis_scale<T>(cfg.wavelet);
    WrrdOut<T> out;
    out.levels.resize(cfg.K);
    ad::Var<T> prev{};
    for (int k = cfg.K; k >= 1; --k) {
        ad::Var<T> f = pyr[k - 1];
        int c = f.val().c;
        auto bands = ad::dwt_stacked(f, as);
        auto A = ad::narrow_channels(bands, 0, c);
        auto V = ad::narrow_channels(bands, c, c);
        auto H = ad::narrow_channels(bands, 2 * c, c);
        auto D = ad::narrow_channels(bands, 3 * c, c);
        auto z = lasdm_forward(ctx, A, sc, cfg, k);
        if (k < cfg.K)
            z = ctx.conv(ad::concat_channels(z, prev), strfmt("lv%d.fuse", k), ConvSpec{c + 4, c, 1, 1, true});
        auto A4 = ctx.conv(z, strfmt("lv%d.proj", k), ConvSpec{c, 4, 1, 1, true});
        auto hf = hfpm_forward(ctx, z, V, H, D, sc, cfg, k);
        LevelState<T>& st = out.levels[k - 1];
        if (force) {
            const Bands<T>& fb = force->levels[k - 1];
            st.A4 = ctx.tape.leaf(fb.A);
            st.V = ctx.tape.leaf(fb.V);
            st.H = ctx.tape.leaf(fb.H);
            st.D = ctx.tape.leaf(fb.D);
        } else {
            st.A4 = A4;
            st.V = hf.V;
            st.H = hf.H;
            st.D = hf.D;
        }
        st.hr_band_h = A.val().h;
        st.hr_band_w = A.val().w;
        auto stacked = ad::concat_channels(ad::concat_channels(st.A4, st.V), ad::concat_channels(st.H, st.D));
        st.idwt = ad::idwt_stacked(stacked, ss);
        prev = st.idwt;
    }
    out.lr = out.levels[0].idwt;
    return out;
}

template <typename T>
WrrdOut<T> model_downscale(Ctx<T>& ctx, ad::Var<T> packed_hr, RationalScale sc, const ModelConfig& cfg,
                           const ForcedCoeffs<T>* force = nullptr) {
    bool known = false;
    for (auto s : cfg.scales) known = known || (s == sc);
    require(known, "model: scale " + sc.str() + " has no trained branch in this parameter set");
    auto pyr = encode_pyramid(ctx, packed_hr, cfg, sc);
    return wrrd_forward(ctx, pyr, sc, cfg, force);
}

// Inference convenience: fresh tape, no gradients.
template <typename T>
Tensor<T> run_downscale(ParamStore<T>& ps, const Tensor<T>& packed, RationalScale sc, const ModelConfig& cfg,
                        ForwardStats* stats = nullptr) {
    ad::Tape<T> tape;
    Ctx<T> ctx{tape, ps, false, stats, {}};
    auto out = model_downscale(ctx, tape.leaf(packed), sc, cfg);
    return out.lr.val();
}

template <typename T>
Tensor<T> center_crop(const Tensor<T>& x, int th, int tw) {
    require(th >= 1 && tw >= 1 && th <= x.h && tw <= x.w, "crop: target exceeds input");
    int oy = (x.h - th) / 2, ox = (x.w - tw) / 2;
    Tensor<T> y(x.c, th, tw);
    for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < th; ++yy)
            for (int xx = 0; xx < tw; ++xx) y.at(c, yy, xx) = x.at(c, oy + yy, ox + xx);
    return y;
}

inline std::pair<int, int> valid_crop_dims(int h, int w, RationalScale sc, int K) {
    int div = (1 << K) * sc.m;
    int th = h / div * div, tw = w / div * div;
    require(th >= div && tw >= div,
            strfmt("image %dx%d too small: needs at least %dx%d for scale %d/%d with %d levels", h, w, div, div,
                   sc.n, sc.m, K));
    return {th, tw};
}

} // namespace rawscale
