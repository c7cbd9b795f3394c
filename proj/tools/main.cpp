// rawscale command-line tool: dataset generation, training, inference,
// baselines, metrics, and a few inspection helpers around the .nraw format.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rawscale/checkpoint.hpp"
#include "rawscale/gradcheck.hpp"
#include "rawscale/isp.hpp"
#include "rawscale/metrics.hpp"
#include "rawscale/nraw.hpp"
#include "rawscale/resample.hpp"
#include "rawscale/synth.hpp"
#include "rawscale/trainer.hpp"

namespace fs = std::filesystem;
using namespace rawscale;
using nlohmann::json;

namespace {

IspConfig isp_config_from_json(const json& j) {
    IspConfig c;
    try {
        if (j.contains("wb")) {
            require(j["wb"].is_array() && j["wb"].size() == 3, "config: isp.wb must have 3 entries");
            for (int i = 0; i < 3; ++i) c.wb[i] = j["wb"][i].get<double>();
        }
        if (j.contains("ccm")) {
            require(j["ccm"].is_array() && j["ccm"].size() == 3, "config: isp.ccm must be 3x3");
            for (int i = 0; i < 3; ++i) {
                require(j["ccm"][i].is_array() && j["ccm"][i].size() == 3, "config: isp.ccm must be 3x3");
                for (int k = 0; k < 3; ++k) c.ccm[i][k] = j["ccm"][i][k].get<double>();
            }
        }
        if (j.contains("transfer")) {
            std::string t = j["transfer"].get<std::string>();
            require(t == "srgb" || t == "gamma", "config: isp.transfer must be srgb|gamma");
            c.transfer = t == "srgb" ? IspConfig::Transfer::srgb : IspConfig::Transfer::gamma;
        }
        if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
    } catch (const json::exception& e) {
        throw contract_error(std::string("config: malformed isp section: ") + e.what());
    }
    return c;
}

struct ConfigDoc {
    ModelConfig model;
    TrainConfig train;
    IspConfig isp;
    json raw = json::object();
};

ConfigDoc load_config(const std::string& path) {
    ConfigDoc d;
    if (path.empty()) return d;
    std::ifstream f(path);
    if (!f) throw io_error("config: cannot open: " + path);
    try {
        d.raw = json::parse(f);
    } catch (const json::exception& e) {
        throw io_error("config: malformed json in " + path + ": " + e.what());
    }
    if (d.raw.contains("model")) d.model = model_config_from_json(d.raw["model"]);
    if (d.raw.contains("train")) d.train = train_config_from_json(d.raw["train"]);
    if (d.raw.contains("isp")) d.isp = isp_config_from_json(d.raw["isp"]);
    return d;
}

TensorF clamp01(TensorF t) {
    for (float& v : t.data) v = std::min(std::max(v, 0.0f), 1.0f);
    return t;
}

// packed payload of either file kind; pair files contribute their HR frame
TensorF read_packed_input(const std::string& path) {
    NrawFile f = nraw_read(path);
    return f.packed;
}

int cmd_gen_data(const std::string& out_dir, int count, uint64_t seed, int hr_size,
                 const std::string& scale_s, double noise, int levels, bool prefiltered) {
    RationalScale sc = parse_scale(scale_s);
    require(count >= 1, "gen-data: count must be >= 1");
    require(levels >= 1 && levels <= 5, "gen-data: levels must be in 1..5");
    int div = (1 << levels) * sc.m;
    require(hr_size % div == 0,
            strfmt("gen-data: hr-size %d must be a multiple of 2^levels*m = %d", hr_size, div));
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        uint64_t s = mix_seed(seed, (uint64_t)i);
        PairedSample p = prefiltered ? generate_prefiltered_pair(s, hr_size, hr_size, sc, noise)
                                     : generate_synthetic_pair(s, hr_size, hr_size, sc, noise);
        nraw_write_pair(strfmt("%s/sample_%04d.nraw", out_dir.c_str(), i), p);
    }
    std::printf("wrote %d pairs (hr %dx%d, scale %s, noise %s) to %s\n", count, hr_size, hr_size,
                sc.str().c_str(), fmt6(noise).c_str(), out_dir.c_str());
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_ckpt, const std::string& config_path,
              const std::string& scale_s, long iters_override, long long seed_override,
              const std::string& curve_path, const std::string& resume_path, bool quiet) {
    ConfigDoc cfg;
    Checkpoint ck;
    long start_iter = 0;
    if (!resume_path.empty()) {
        ck = load_checkpoint(resume_path);
        if (!ck.config.contains("model")) throw io_error("resume: checkpoint has no model config");
        cfg.model = model_config_from_json(ck.config["model"]);
        if (ck.config.contains("train")) cfg.train = train_config_from_json(ck.config["train"]);
        if (ck.config.contains("isp")) cfg.raw["isp"] = ck.config["isp"];
        start_iter = ck.iteration;
    } else {
        cfg = load_config(config_path);
        if (!scale_s.empty()) cfg.model.scales = {parse_scale(scale_s)};
    }
    if (iters_override >= 0) cfg.train.iters = iters_override;
    if (seed_override >= 0) cfg.train.seed = (uint64_t)seed_override;
    require(start_iter <= cfg.train.iters,
            strfmt("train: checkpoint is already at iteration %ld >= iters %ld", start_iter, cfg.train.iters));

    std::vector<PairedSample> all = load_pair_dir(data_dir);
    std::vector<PairedSample> data;
    for (auto& s : all)
        for (auto sc : cfg.model.scales)
            if (sc == s.scale) {
                data.push_back(std::move(s));
                break;
            }
    require(!data.empty(), "train: no pairs matching the requested scale(s) in " + data_dir);

    if (resume_path.empty()) ck.params = build_params<float>(cfg.model, cfg.train.seed);
    long report_every = std::max(1L, (cfg.train.iters - start_iter) / 10);
    auto progress = [&](long it, const CurveRow& row) {
        if (!quiet && (it % report_every == 0 || it == cfg.train.iters))
            std::printf("iter %ld/%ld lr=%s l_total=%s\n", it, cfg.train.iters, fmt6(row.lr).c_str(),
                        fmt6(row.loss.total).c_str());
    };
    auto curve = train_loop(cfg.model, cfg.train, data, ck.params, start_iter, cfg.train.iters, progress);

    json full{{"model", model_config_to_json(cfg.model)}, {"train", train_config_to_json(cfg.train)}};
    if (cfg.raw.contains("isp")) full["isp"] = cfg.raw["isp"];
    ck.iteration = cfg.train.iters;
    ck.config = full;
    save_checkpoint(out_ckpt, ck);
    if (!curve_path.empty()) write_curve_csv(curve_path, curve);
    if (!curve.empty())
        std::printf("done: %zu iterations, final l_total=%s\n", curve.size(),
                    fmt6(curve.back().loss.total).c_str());
    std::printf("saved checkpoint to %s (iteration %ld)\n", out_ckpt.c_str(), ck.iteration);
    return 0;
}

int cmd_downscale(const std::string& ckpt_path, const std::string& in_path, const std::string& scale_s,
                  const std::string& out_path, const std::string& srgb_path, const std::string& config_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    if (!ck.config.contains("model")) throw io_error("downscale: checkpoint has no model config");
    ModelConfig mcfg = model_config_from_json(ck.config["model"]);
    RationalScale sc = parse_scale(scale_s);
    TensorF x = read_packed_input(in_path);
    TensorF y = clamp01(run_downscale(ck.params, x, sc, mcfg));
    nraw_write_packed(out_path, y, sc);
    std::printf("downscaled %dx%d -> %dx%d (scale %s), wrote %s\n", x.h, x.w, y.h, y.w, sc.str().c_str(),
                out_path.c_str());
    if (!srgb_path.empty()) {
        IspConfig isp = config_path.empty() ? IspConfig{} : load_config(config_path).isp;
        if (config_path.empty() && ck.config.contains("isp")) isp = isp_config_from_json(ck.config["isp"]);
        write_ppm(srgb_path, isp_render(y, isp));
        std::printf("wrote srgb preview %s\n", srgb_path.c_str());
    }
    return 0;
}

int cmd_baseline(const std::string& in_path, const std::string& out_path, const std::string& scale_s,
                 const std::string& kernel_s, const std::string& domain, const std::string& config_path) {
    RationalScale sc = parse_scale(scale_s);
    ResampleKernel k = parse_kernel(kernel_s);
    require(domain == "raw" || domain == "srgb", "baseline: domain must be raw|srgb");
    TensorF x = read_packed_input(in_path);
    if (domain == "raw") {
        TensorF y = clamp01(interpolate_resample(x, sc, k));
        nraw_write_packed(out_path, y, sc);
        std::printf("baseline %s (raw): %dx%d -> %dx%d, wrote %s\n", kernel_s.c_str(), x.h, x.w, y.h, y.w,
                    out_path.c_str());
    } else {
        IspConfig isp = load_config(config_path).isp;
        TensorF rgb = isp_render(x, isp);
        TensorF y = clamp01(interpolate_resample(rgb, sc, k));
        write_ppm(out_path, y);
        std::printf("baseline %s (srgb): %dx%d -> %dx%d, wrote %s\n", kernel_s.c_str(), rgb.h, rgb.w, y.h,
                    y.w, out_path.c_str());
    }
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& ref_path, const std::string& domain,
             const std::string& report_path, const std::string& method, std::string sample_id,
             const std::string& config_path) {
    require(domain == "raw" || domain == "srgb", "eval: domain must be raw|srgb");
    NrawFile pf = nraw_read(pred_path);
    require(pf.kind == "packed", "eval: --pred must be a packed .nraw (got kind '" + pf.kind + "')");
    NrawFile rf = nraw_read(ref_path);
    TensorF pred = pf.packed;
    TensorF ref = rf.kind == "pair" ? *rf.lr : rf.packed;
    require(pred.same_shape(ref),
            strfmt("eval: prediction %dx%dx%d and reference %dx%dx%d differ in shape", pred.c, pred.h,
                   pred.w, ref.c, ref.h, ref.w));
    if (domain == "srgb") {
        IspConfig isp = load_config(config_path).isp;
        pred = isp_render(pred, isp);
        ref = isp_render(ref, isp);
    }
    double p = psnr_table_value(psnr(pred, ref));
    double s = ssim(pred, ref);
    std::string scale_str = "-";
    if (pf.scale) scale_str = pf.scale->str();
    else if (rf.scale) scale_str = rf.scale->str();
    if (sample_id.empty()) sample_id = fs::path(pred_path).stem().string();
    if (!report_path.empty()) {
        bool fresh = !fs::exists(report_path) || fs::file_size(report_path) == 0;
        std::ofstream f(report_path, std::ios::app);
        if (!f) throw io_error("eval: cannot open report: " + report_path);
        if (fresh) f << "sample_id,scale,domain,method,psnr_db,ssim\n";
        f << sample_id << "," << scale_str << "," << domain << "," << method << "," << fmt6(p) << ","
          << fmt6(s) << "\n";
        if (!f) throw io_error("eval: report write failed: " + report_path);
    }
    std::printf("%s scale=%s domain=%s method=%s psnr_db=%s ssim=%s\n", sample_id.c_str(),
                scale_str.c_str(), domain.c_str(), method.c_str(), fmt6(p).c_str(), fmt6(s).c_str());
    return 0;
}

int cmd_gradcheck(const std::string& config_path, const std::string& scale_s, int size, int coords,
                  uint64_t seed) {
    std::printf("primitive gradients (tol 1e-6):\n");
    bool prim_ok = true;
    for (const auto& pc : primitive_grad_checks()) {
        bool ok = pc.max_rel <= 1e-6;
        prim_ok = prim_ok && ok;
        std::printf("  %-22s max_rel=%-12s %s\n", pc.name.c_str(), fmt6(pc.max_rel).c_str(),
                    ok ? "pass" : "FAIL");
    }
    ModelConfig mcfg;
    if (!config_path.empty()) {
        mcfg = load_config(config_path).model;
    } else {
        mcfg.K = 2;
        mcfg.c_base = 2;
    }
    RationalScale sc = parse_scale(scale_s);
    bool found = false;
    for (auto s : mcfg.scales) found = found || (s == sc);
    if (!found) mcfg.scales.push_back(sc);
    auto rep = grad_check_model(mcfg, sc, size, size, coords, seed);
    std::printf("model (K=%d c=%d input 4x%dx%d scale %s): coords=%d pass_frac=%s max_rel=%s mean_rel=%s "
                "topk_margin=%s attempts=%d -> %s\n",
                mcfg.K, mcfg.c_base, size, size, sc.str().c_str(), rep.coords, fmt6(rep.frac).c_str(),
                fmt6(rep.max_rel).c_str(), fmt6(rep.mean_rel).c_str(), fmt6(rep.topk_margin).c_str(),
                rep.attempts, rep.pass ? "pass" : "FAIL");
    std::printf("overall: %s\n", prim_ok && rep.pass ? "pass" : "FAIL");
    return 0;
}

int cmd_dwt(const std::string& in_path, int levels, const std::string& out_dir,
            const std::string& convention) {
    require(convention == "orthonormal" || convention == "average",
            "dwt: convention must be orthonormal|average");
    HaarNorm norm = convention == "orthonormal" ? HaarNorm::orthonormal : HaarNorm::average;
    TensorF x = read_packed_input(in_path);
    WaveletPyramid<float> pyr = dwt_pyramid(x, levels, norm);
    fs::create_directories(out_dir);
    double gain = 1;
    for (int k = 1; k <= levels; ++k) {
        const Bands<float>& b = pyr.levels[k - 1];
        if (norm == HaarNorm::orthonormal) gain *= 2; // per-level amplitude of the A band
        const TensorF* bands[4] = {&b.A, &b.V, &b.H, &b.D};
        const char* names[4] = {"A", "V", "H", "D"};
        for (int i = 0; i < 4; ++i) {
            std::string base = strfmt("%s/L%d_%s", out_dir.c_str(), k, names[i]);
            nraw_write_packed(base + ".nraw", *bands[i]);
            TensorF disp = *bands[i];
            for (float& v : disp.data)
                v = i == 0 ? (float)(v / gain) : (float)((v + 1) * 0.5); // details: [-1,1] -> [0,1]
            write_ppm(base + ".ppm", isp_render(clamp01(std::move(disp))));
        }
    }
    std::printf("wrote %d pyramid levels to %s\n", levels, out_dir.c_str());
    return 0;
}

int cmd_crop_valid(const std::string& in_path, const std::string& scale_s, int levels,
                   const std::string& out_path) {
    RationalScale sc = parse_scale(scale_s);
    TensorF x = read_packed_input(in_path);
    auto [th, tw] = valid_crop_dims(x.h, x.w, sc, levels);
    TensorF y = center_crop(x, th, tw);
    nraw_write_packed(out_path, y);
    std::printf("cropped %dx%d -> %dx%d (multiple of %d), wrote %s\n", x.h, x.w, th, tw,
                (1 << levels) * sc.m, out_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wavelet-recurrent raw downscaler"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate synthetic paired raw samples");
    std::string g_out, g_scale = "2";
    int g_count = 8, g_size = 64, g_levels = 4;
    uint64_t g_seed = 0;
    double g_noise = 0.01;
    bool g_pref = false;
    gen->add_option("--out", g_out, "output directory")->required();
    gen->add_option("--count", g_count, "number of pairs");
    gen->add_option("--seed", g_seed, "base seed");
    gen->add_option("--hr-size", g_size, "packed HR side length");
    gen->add_option("--scale", g_scale, "downscale factor (decimal or a/b)");
    gen->add_option("--noise", g_noise, "sensor noise sigma (fraction of range)");
    gen->add_option("--levels", g_levels, "pyramid depth the samples must support");
    gen->add_flag("--prefiltered", g_pref, "prefilter+lanczos LR instead of analytic LR");

    // train
    auto* tr = app.add_subcommand("train", "train a model on a pair directory");
    std::string t_data, t_out, t_config, t_scale, t_curve, t_resume;
    long t_iters = -1;
    long long t_seed = -1;
    bool t_quiet = false;
    tr->add_option("--data", t_data, "directory of pair .nraw files")->required();
    tr->add_option("--out", t_out, "output checkpoint path")->required();
    tr->add_option("--config", t_config, "json config file");
    tr->add_option("--scale", t_scale, "train scale (overrides config)");
    tr->add_option("--iters", t_iters, "total iterations (overrides config)");
    tr->add_option("--seed", t_seed, "train seed (overrides config)");
    tr->add_option("--curve", t_curve, "write per-iteration loss csv here");
    tr->add_option("--resume", t_resume, "checkpoint to continue from");
    tr->add_flag("--quiet", t_quiet, "suppress progress lines");

    // downscale
    auto* ds = app.add_subcommand("downscale", "run the model on a raw frame");
    std::string d_ckpt, d_in, d_scale, d_out, d_srgb, d_config;
    ds->add_option("--ckpt", d_ckpt, "checkpoint")->required();
    ds->add_option("--in", d_in, ".nraw input (pair files use their HR frame)")->required();
    ds->add_option("--scale", d_scale, "downscale factor")->required();
    ds->add_option("--out", d_out, "output .nraw")->required();
    ds->add_option("--srgb", d_srgb, "also write an sRGB .ppm preview here");
    ds->add_option("--config", d_config, "json config (isp section for --srgb)");

    // baseline
    auto* bl = app.add_subcommand("baseline", "classical resampling baselines");
    std::string b_in, b_out, b_scale, b_kernel, b_domain = "raw", b_config;
    bl->add_option("--in", b_in, ".nraw input (pair files use their HR frame)")->required();
    bl->add_option("--out", b_out, "output (.nraw for raw domain, .ppm for srgb)")->required();
    bl->add_option("--scale", b_scale, "downscale factor")->required();
    bl->add_option("--kernel", b_kernel, "nearest|bilinear|bicubic|area|lanczos3")->required();
    bl->add_option("--domain", b_domain, "raw|srgb");
    bl->add_option("--config", b_config, "json config (isp section)");

    // eval
    auto* ev = app.add_subcommand("eval", "psnr/ssim of a prediction against a reference");
    std::string e_pred, e_ref, e_domain = "raw", e_report, e_method = "model", e_id, e_config;
    ev->add_option("--pred", e_pred, "packed .nraw prediction")->required();
    ev->add_option("--ref", e_ref, "reference .nraw (pair files use their LR frame)")->required();
    ev->add_option("--domain", e_domain, "raw|srgb");
    ev->add_option("--report", e_report, "append a row to this csv");
    ev->add_option("--method", e_method, "method column value");
    ev->add_option("--sample-id", e_id, "sample_id column value (default: pred stem)");
    ev->add_option("--config", e_config, "json config (isp section)");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient report");
    std::string c_config, c_scale = "2";
    int c_size = 16, c_coords = 500;
    uint64_t c_seed = 1;
    gc->add_option("--config", c_config, "json config (model section)");
    gc->add_option("--scale", c_scale, "downscale factor");
    gc->add_option("--size", c_size, "packed input side length");
    gc->add_option("--coords", c_coords, "parameter coordinates to probe");
    gc->add_option("--seed", c_seed, "seed");

    // dwt
    auto* dw = app.add_subcommand("dwt", "dump a wavelet pyramid for inspection");
    std::string w_in, w_out, w_conv = "orthonormal";
    int w_levels = 1;
    dw->add_option("--in", w_in, ".nraw input (pair files use their HR frame)")->required();
    dw->add_option("--levels", w_levels, "pyramid depth");
    dw->add_option("--out", w_out, "output directory")->required();
    dw->add_option("--convention", w_conv, "orthonormal|average");

    // crop-valid
    auto* cv = app.add_subcommand("crop-valid", "center-crop to model-valid dimensions");
    std::string v_in, v_scale, v_out;
    int v_levels = 4;
    cv->add_option("--in", v_in, ".nraw input (pair files use their HR frame)")->required();
    cv->add_option("--scale", v_scale, "downscale factor")->required();
    cv->add_option("--levels", v_levels, "pyramid depth");
    cv->add_option("--out", v_out, "output packed .nraw")->required();

    try {
        app.parse(argc, argv);
        if (*gen) return cmd_gen_data(g_out, g_count, g_seed, g_size, g_scale, g_noise, g_levels, g_pref);
        if (*tr) return cmd_train(t_data, t_out, t_config, t_scale, t_iters, t_seed, t_curve, t_resume, t_quiet);
        if (*ds) return cmd_downscale(d_ckpt, d_in, d_scale, d_out, d_srgb, d_config);
        if (*bl) return cmd_baseline(b_in, b_out, b_scale, b_kernel, b_domain, b_config);
        if (*ev) return cmd_eval(e_pred, e_ref, e_domain, e_report, e_method, e_id, e_config);
        if (*gc) return cmd_gradcheck(c_config, c_scale, c_size, c_coords, c_seed);
        if (*dw) return cmd_dwt(w_in, w_levels, w_out, w_conv);
        if (*cv) return cmd_crop_valid(v_in, v_scale, v_levels, v_out);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::endl;
        return 1;
    } catch (const contract_error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
}
