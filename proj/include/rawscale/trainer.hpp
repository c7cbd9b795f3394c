#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rawscale/checkpoint.hpp"
#include "rawscale/losses.hpp"
#include "rawscale/model.hpp"
#include "rawscale/nraw.hpp"

namespace rawscale {

struct TrainConfig {
    double lr0 = 1e-4;
    double decay = 0.8;
    long decay_every = 40000;
    long iters = 2000;
    int batch = 2;
    double lambda_em = 0.1;
    bool em_lr_dims = false;
    uint64_t seed = 0;
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return nlohmann::json{
        {"lr0", c.lr0},           {"decay", c.decay},   {"decay_every", c.decay_every},
        {"iters", c.iters},       {"batch", c.batch},   {"lambda_em", c.lambda_em},
        {"em_lr_dims", c.em_lr_dims}, {"seed", c.seed},
    };
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        if (j.contains("lr0")) c.lr0 = j["lr0"].get<double>();
        if (j.contains("decay")) c.decay = j["decay"].get<double>();
        if (j.contains("decay_every")) c.decay_every = j["decay_every"].get<long>();
        if (j.contains("iters")) c.iters = j["iters"].get<long>();
        if (j.contains("batch")) c.batch = j["batch"].get<int>();
        if (j.contains("lambda_em")) c.lambda_em = j["lambda_em"].get<double>();
        if (j.contains("em_lr_dims")) c.em_lr_dims = j["em_lr_dims"].get<bool>();
        if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw contract_error(std::string("config: malformed train section: ") + e.what());
    }
    require(c.lr0 > 0, "config: lr0 must be > 0");
    require(c.decay > 0 && c.decay <= 1, "config: decay must be in (0, 1]");
    require(c.decay_every >= 1, "config: decay_every must be >= 1");
    require(c.iters >= 0, "config: iters must be >= 0");
    require(c.batch >= 1, "config: batch must be >= 1");
    require(c.lambda_em >= 0, "config: lambda_em must be >= 0");
    return c;
}

// Staircase decay. The default 0.8 factor is evaluated as the exact ratio
// 4^k/5^k so the advertised decimal values (8e-5, 6.4e-5, ...) come out as
// the correctly rounded doubles rather than drifting one ulp per step.
inline double lr_schedule(long iter, const TrainConfig& cfg) {
    require(iter >= 0, "lr_schedule: negative iteration");
    long k = iter / cfg.decay_every;
    if (cfg.decay == 0.8 && k <= 22) { // 4^22 and 5^22 are both exact doubles
        double p4 = 1, p5 = 1;
        for (long i = 0; i < k; ++i) {
            p4 *= 4.0;
            p5 *= 5.0;
        }
        return (cfg.lr0 * p4) / p5; // this association lands on the decimal values
    }
    return cfg.lr0 * std::pow(cfg.decay, (double)k);
}

// One Adam update over the named gradient set. Math in double, storage f32.
inline void adam_step(ParamStore<float>& ps, const std::map<std::string, TensorF>& grads, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    long t = ++ps.adam_steps;
    double bc1 = 1.0 - std::pow(beta1, (double)t);
    double bc2 = 1.0 - std::pow(beta2, (double)t);
    for (const auto& [name, g] : grads) {
        auto& e = ps.at(name);
        require(g.same_shape(e.value), "adam: gradient shape mismatch for '" + name + "'");
        for (size_t i = 0; i < g.data.size(); ++i) {
            double gi = g.data[i];
            double m = beta1 * e.m.data[i] + (1.0 - beta1) * gi;
            double v = beta2 * e.v.data[i] + (1.0 - beta2) * gi * gi;
            e.m.data[i] = (float)m;
            e.v.data[i] = (float)v;
            double step = lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
            e.value.data[i] = (float)(e.value.data[i] - step);
        }
    }
}

inline std::vector<PairedSample> load_pair_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw io_error("dataset: not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& ent : fs::directory_iterator(dir))
        if (ent.is_regular_file() && ent.path().extension() == ".nraw") files.push_back(ent.path().string());
    std::sort(files.begin(), files.end());
    std::vector<PairedSample> out;
    for (const auto& p : files) {
        NrawFile f = nraw_read(p);
        if (f.kind != "pair") continue;
        PairedSample s;
        s.hr = f.packed;
        s.lr = *f.lr;
        s.scale = *f.scale;
        s.noise_sigma = f.noise_sigma;
        s.scene_seed = f.seed;
        s.lr_mode = f.lr_mode;
        out.push_back(std::move(s));
    }
    return out;
}

struct CurveRow {
    long iter = 0; // 1-based in reports
    double lr = 0;
    LossReport loss;
};

inline void write_curve_csv(const std::string& path, const std::vector<CurveRow>& rows) {
    std::ofstream f(path);
    if (!f) throw io_error("curve: cannot open for writing: " + path);
    f << "iter,lr,l_con,l_hwc,l_em,l_total\n";
    for (const auto& r : rows)
        f << r.iter << "," << fmt6(r.lr) << "," << fmt6(r.loss.con) << "," << fmt6(r.loss.hwc) << ","
          << fmt6(r.loss.em) << "," << fmt6(r.loss.total) << "\n";
    if (!f) throw io_error("curve: write failed: " + path);
}

// Runs iterations [start_iter, end_iter). Batch membership depends only on
// (seed, iter, slot), so training is resumable bit-exactly from a checkpoint.
inline std::vector<CurveRow> train_loop(const ModelConfig& mcfg, const TrainConfig& tcfg,
                                        const std::vector<PairedSample>& data, ParamStore<float>& ps,
                                        long start_iter, long end_iter,
                                        const std::function<void(long, const CurveRow&)>& progress = {}) {
    require(!data.empty(), "train: empty dataset");
    require(start_iter >= 0 && start_iter <= end_iter, "train: bad iteration range");
    for (const auto& s : data) {
        bool known = false;
        for (auto sc : mcfg.scales) known = known || (sc == s.scale);
        require(known, "train: dataset scale " + s.scale.str() + " not in model scales");
    }
    std::vector<CurveRow> curve;
    curve.reserve((size_t)(end_iter - start_iter));
    for (long it = start_iter; it < end_iter; ++it) {
        double lr = lr_schedule(it, tcfg);
        std::map<std::string, TensorF> grads;
        LossReport sum;
        for (int b = 0; b < tcfg.batch; ++b) {
            const PairedSample& s = data[(size_t)(mix_seed(tcfg.seed, (uint64_t)it, (uint64_t)b) % data.size())];
            ad::Tape<float> tape;
            Ctx<float> ctx{tape, ps, true, nullptr, {}};
            auto out = model_downscale(ctx, tape.leaf(s.hr), s.scale, mcfg);
            auto lr_pyr = dwt_pyramid(s.lr, mcfg.K, mcfg.wavelet);
            auto hr_pyr = dwt_pyramid(s.hr, mcfg.K, mcfg.wavelet);
            auto lv = compute_losses(ctx, out, s.lr, lr_pyr, hr_pyr, tcfg.lambda_em, tcfg.em_lr_dims);
            tape.backward(ad::scale(lv.total, 1.0f / (float)tcfg.batch));
            for (const auto& [name, var] : ctx.leaves) {
                if (!tape.has_grad(var.id)) continue;
                const TensorF& g = tape.grad(var.id);
                auto it2 = grads.find(name);
                if (it2 == grads.end()) {
                    grads.emplace(name, g);
                } else {
                    TensorF& acc = it2->second;
                    for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
                }
            }
            LossReport r = loss_report(lv, tcfg.lambda_em);
            sum.con += r.con;
            sum.hwc += r.hwc;
            sum.em += r.em;
        }
        adam_step(ps, grads, lr);
        CurveRow row;
        row.iter = it + 1;
        row.lr = lr;
        row.loss.con = sum.con / tcfg.batch;
        row.loss.hwc = sum.hwc / tcfg.batch;
        row.loss.em = sum.em / tcfg.batch;
        row.loss.total = total_loss(row.loss.con, row.loss.hwc, row.loss.em, tcfg.lambda_em);
        curve.push_back(row);
        if (progress) progress(it + 1, row);
    }
    return curve;
}

} // namespace rawscale
