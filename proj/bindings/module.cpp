// Python bindings for the core operations. Arrays are (c, h, w) float32,
// C-contiguous; mosaics for pack_bayer are (h, w).

#include <cstring>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rawscale/checkpoint.hpp"
#include "rawscale/gradcheck.hpp"
#include "rawscale/isp.hpp"
#include "rawscale/losses.hpp"
#include "rawscale/metrics.hpp"
#include "rawscale/nraw.hpp"
#include "rawscale/resample.hpp"
#include "rawscale/synth.hpp"
#include "rawscale/trainer.hpp"

namespace py = pybind11;
using namespace rawscale;

namespace {

TensorF to_tensor(const py::array& a) {
    auto arr = py::array_t<float, py::array::c_style | py::array::forcecast>::ensure(a);
    if (!arr || arr.ndim() != 3) throw contract_error("expected a (c, h, w) array");
    TensorF t((int)arr.shape(0), (int)arr.shape(1), (int)arr.shape(2));
    std::memcpy(t.data.data(), arr.data(), t.size() * sizeof(float));
    return t;
}

py::array_t<float> from_tensor(const TensorF& t) {
    py::array_t<float> a({t.c, t.h, t.w});
    std::memcpy(a.mutable_data(), t.data.data(), t.size() * sizeof(float));
    return a;
}

HaarNorm norm_of(const std::string& s) {
    require(s == "orthonormal" || s == "average", "convention must be orthonormal|average");
    return s == "orthonormal" ? HaarNorm::orthonormal : HaarNorm::average;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "wavelet-recurrent raw downscaler core";

    py::register_exception<contract_error>(m, "ContractError", PyExc_ValueError);
    py::register_exception<io_error>(m, "IoError", PyExc_IOError);

    m.def("parse_scale", [](const std::string& s) {
        RationalScale sc = parse_scale(s);
        return py::make_tuple(sc.n, sc.m);
    }, py::arg("text"), "parse a downscale factor into the reduced (n, m) ratio, LR = HR * n/m");

    m.def("dwt2", [](const py::array& x, const std::string& conv) {
        Bands<float> b = dwt2d(to_tensor(x), norm_of(conv));
        return py::make_tuple(from_tensor(b.A), from_tensor(b.V), from_tensor(b.H), from_tensor(b.D));
    }, py::arg("x"), py::arg("convention") = "orthonormal", "single-level Haar analysis -> (A, V, H, D)");

    m.def("idwt2", [](const py::array& A, const py::array& V, const py::array& H, const py::array& D,
                      const std::string& conv) {
        Bands<float> b{to_tensor(A), to_tensor(V), to_tensor(H), to_tensor(D)};
        return from_tensor(idwt2d(b, norm_of(conv)));
    }, py::arg("A"), py::arg("V"), py::arg("H"), py::arg("D"), py::arg("convention") = "orthonormal");

    m.def("dwt_pyramid", [](const py::array& x, int levels, const std::string& conv) {
        WaveletPyramid<float> p = dwt_pyramid(to_tensor(x), levels, norm_of(conv));
        py::list out;
        for (const auto& b : p.levels)
            out.append(py::make_tuple(from_tensor(b.A), from_tensor(b.V), from_tensor(b.H), from_tensor(b.D)));
        return out;
    }, py::arg("x"), py::arg("levels"), py::arg("convention") = "orthonormal");

    m.def("pixel_unshuffle", [](const py::array& x, int r) {
        return from_tensor(pixel_unshuffle_fwd(to_tensor(x), r));
    }, py::arg("x"), py::arg("r"));

    m.def("pixel_shuffle", [](const py::array& x, int r) {
        return from_tensor(pixel_shuffle_fwd(to_tensor(x), r));
    }, py::arg("x"), py::arg("r"));

    m.def("pack_bayer", [](const py::array& mosaic, float black, float white) {
        auto arr = py::array_t<float, py::array::c_style | py::array::forcecast>::ensure(mosaic);
        if (!arr || arr.ndim() != 2) throw contract_error("pack_bayer: expected a (h, w) mosaic");
        BayerFrame f;
        f.height = (int)arr.shape(0);
        f.width = (int)arr.shape(1);
        f.black_level = black;
        f.white_level = white;
        f.samples.assign(arr.data(), arr.data() + (size_t)f.width * f.height);
        return from_tensor(pack_bayer(f));
    }, py::arg("mosaic"), py::arg("black_level") = 64.0f, py::arg("white_level") = 1023.0f);

    m.def("unpack_bayer", [](const py::array& packed) {
        BayerFrame f = unpack_bayer(to_tensor(packed));
        py::array_t<float> a({f.height, f.width});
        std::memcpy(a.mutable_data(), f.samples.data(), f.samples.size() * sizeof(float));
        return a;
    }, py::arg("packed"));

    m.def("generate_pair", [](uint64_t seed, int h, int w, const std::string& scale, double noise) {
        PairedSample p = generate_synthetic_pair(seed, h, w, parse_scale(scale), noise);
        return py::make_tuple(from_tensor(p.hr), from_tensor(p.lr));
    }, py::arg("seed"), py::arg("h"), py::arg("w"), py::arg("scale") = "2", py::arg("noise") = 0.0,
       "synthetic paired sample -> (hr, lr), both packed (4, ., .)");

    m.def("nraw_write", [](const std::string& path, const py::array& x, const std::string& scale) {
        std::optional<RationalScale> sc;
        if (!scale.empty()) sc = parse_scale(scale);
        nraw_write_packed(path, to_tensor(x), sc);
    }, py::arg("path"), py::arg("x"), py::arg("scale") = "");

    m.def("nraw_read", [](const std::string& path) {
        NrawFile f = nraw_read(path);
        py::dict d;
        d["kind"] = f.kind;
        d["packed"] = from_tensor(f.packed);
        if (f.lr) d["lr"] = from_tensor(*f.lr);
        if (f.scale) d["scale"] = py::make_tuple(f.scale->n, f.scale->m);
        d["cfa"] = f.cfa;
        d["noise_sigma"] = f.noise_sigma;
        d["seed"] = f.seed;
        if (!f.lr_mode.empty()) d["lr_mode"] = f.lr_mode;
        return d;
    }, py::arg("path"));

    m.def("psnr", [](const py::array& a, const py::array& b) {
        return psnr_table_value(psnr(to_tensor(a), to_tensor(b)));
    }, py::arg("a"), py::arg("b"), "psnr in dB against peak 1.0, capped at 99");

    m.def("ssim", [](const py::array& a, const py::array& b) { return ssim(to_tensor(a), to_tensor(b)); },
          py::arg("a"), py::arg("b"));

    m.def("resample", [](const py::array& x, const std::string& scale, const std::string& kernel) {
        return from_tensor(interpolate_resample(to_tensor(x), parse_scale(scale), parse_kernel(kernel)));
    }, py::arg("x"), py::arg("scale"), py::arg("kernel") = "area",
       "per-channel resample by a rational factor: nearest|bilinear|bicubic|area|lanczos3");

    m.def("isp_render", [](const py::array& packed) { return from_tensor(isp_render(to_tensor(packed))); },
          py::arg("packed"), "fixed-pipeline render of a packed frame to (3, h, w) sRGB");

    m.def("write_ppm", [](const std::string& path, const py::array& rgb) { write_ppm(path, to_tensor(rgb)); },
          py::arg("path"), py::arg("rgb"));

    m.def("srgb_oetf", [](double v) { return srgb_oetf(v); }, py::arg("v"));

    m.def("lr_schedule", [](long iter, double lr0, double decay, long every) {
        TrainConfig c;
        c.lr0 = lr0;
        c.decay = decay;
        c.decay_every = every;
        return lr_schedule(iter, c);
    }, py::arg("iter"), py::arg("lr0") = 1e-4, py::arg("decay") = 0.8, py::arg("decay_every") = 40000);

    m.def("total_loss", &total_loss, py::arg("l_con"), py::arg("l_hwc"), py::arg("l_em"),
          py::arg("lambda_em") = 0.1);

    m.def("downscale", [](const std::string& ckpt, const py::array& x, const std::string& scale) {
        Checkpoint ck = load_checkpoint(ckpt);
        if (!ck.config.contains("model")) throw io_error("checkpoint has no model config");
        ModelConfig mcfg = model_config_from_json(ck.config["model"]);
        TensorF y = run_downscale(ck.params, to_tensor(x), parse_scale(scale), mcfg);
        for (float& v : y.data) v = std::min(std::max(v, 0.0f), 1.0f);
        return from_tensor(y);
    }, py::arg("ckpt"), py::arg("x"), py::arg("scale"), "run a trained checkpoint on a packed frame");

    m.def("grad_check_primitives", []() {
        py::dict d;
        for (const auto& pc : primitive_grad_checks()) d[pc.name.c_str()] = pc.max_rel;
        return d;
    }, "max relative error of each differentiable primitive against central differences");
}
