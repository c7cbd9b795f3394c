#include <doctest.h>

#include <cmath>

#include "rawscale/losses.hpp"
#include "rawscale/metrics.hpp"
#include "rawscale/synth.hpp"

using namespace rawscale;

TEST_CASE("total loss association is pinned") {
    CHECK(total_loss(1.0, 2.0, 3.0, 0.1) == 3.3);
    CHECK(total_loss(0.0, 0.0, 5.0, 0.0) == 0.0);
    CHECK(total_loss(1.5, 0.25, 0.0, 0.1) == 1.75);
    CHECK_THROWS_AS(total_loss(1.0, 1.0, 1.0, -0.1), contract_error);
}

TEST_CASE("each loss term vanishes on its own reference") {
    ModelConfig cfg;
    cfg.K = 2;
    cfg.c_base = 4;
    PairedSample pair = generate_synthetic_pair(21, 32, 32, make_scale(1, 2), 0.0);
    TensorD lr = pair.lr.cast<double>();
    WaveletPyramid<double> lr_pyr = dwt_pyramid(lr, cfg.K, cfg.wavelet);

    // teacher-force the reference coefficients: content and coefficient terms
    // must collapse, and feeding the same pyramid as the energy target zeroes
    // the energy term too
    ForcedCoeffs<double> force;
    force.levels = lr_pyr.levels;
    auto ps = build_params<double>(cfg, 3);
    ad::Tape<double> tape;
    Ctx<double> ctx{tape, ps, false, nullptr, {}};
    auto out = model_downscale(ctx, tape.leaf(pair.hr.cast<double>()), make_scale(1, 2), cfg, &force);

    auto con = loss_content(ctx, out, lr);
    CHECK(con.val().data[0] < 1e-12); // one dwt/idwt roundtrip of noise
    auto hwc = loss_coeffs(ctx, out, lr_pyr);
    CHECK(hwc.val().data[0] == 0.0); // identical tensors, exact zero
    auto em = loss_energy(ctx, out, lr_pyr);
    CHECK(em.val().data[0] == 0.0);
}

TEST_CASE("energy term matches a hand-computed value") {
    ad::Tape<double> tape;
    ParamStore<double> ps;
    Ctx<double> ctx{tape, ps, false, nullptr, {}};
    auto band = [&](std::initializer_list<double> vals, int h, int w) {
        TensorD t(1, h, w);
        std::copy(vals.begin(), vals.end(), t.data.begin());
        return t;
    };
    WrrdOut<double> out;
    out.levels.resize(1);
    out.levels[0].V = tape.leaf(band({3, 0, 0, 0}, 2, 2)); // ||.|| = 3
    out.levels[0].H = tape.leaf(band({0, 0, 0, 0}, 2, 2)); // ||.|| = 0
    out.levels[0].D = tape.leaf(band({1, 1, 1, 1}, 2, 2)); // ||.|| = 2
    WaveletPyramid<double> hr;
    hr.levels.resize(1);
    hr.levels[0].V = band({5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 4, 4);
    hr.levels[0].H = band({4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 4, 4);
    hr.levels[0].D = band({0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 4, 4);
    // hr-normalized: (|3-5| + |0-4| + |2-0|) / 16 = 0.5
    CHECK(loss_energy(ctx, out, hr).val().data[0] == 0.5);
    // lr-normalized: same numerators over 4 pixels = 2.0
    CHECK(loss_energy(ctx, out, hr, true).val().data[0] == 2.0);
}

TEST_CASE("report total equals the pinned combination bit for bit") {
    ModelConfig cfg;
    cfg.K = 2;
    cfg.c_base = 4;
    PairedSample pair = generate_synthetic_pair(33, 32, 32, make_scale(1, 2), 0.01);
    TensorD hr = pair.hr.cast<double>(), lr = pair.lr.cast<double>();
    auto lr_pyr = dwt_pyramid(lr, cfg.K, cfg.wavelet);
    auto hr_pyr = dwt_pyramid(hr, cfg.K, cfg.wavelet);
    auto ps = build_params<double>(cfg, 9);
    ad::Tape<double> tape;
    Ctx<double> ctx{tape, ps, true, nullptr, {}};
    auto out = model_downscale(ctx, tape.leaf(hr), make_scale(1, 2), cfg);
    auto lv = compute_losses(ctx, out, lr, lr_pyr, hr_pyr, 0.1);
    LossReport r = loss_report(lv, 0.1);
    CHECK(r.total == total_loss(r.con, r.hwc, r.em, 0.1));
    CHECK(lv.total.val().data[0] == r.total); // graph uses the same association
    CHECK(r.con > 0.0);
    CHECK(r.hwc > 0.0);
    CHECK(r.em > 0.0);
    // mismatched reference shapes are rejected
    TensorD wrong(4, 8, 8, 0.0);
    CHECK_THROWS_AS(loss_content(ctx, out, wrong), contract_error);
}

TEST_CASE("psnr basics") {
    TensorD a(4, 16, 16, 0.5), b(4, 16, 16, 0.6);
    CHECK(std::abs(psnr(a, b) - 20.0) < 1e-9); // mse 0.01
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
    CHECK(psnr_table_value(psnr(a, a)) == 99.0);
    CHECK(psnr_table_value(31.7) == 31.7);
    Rng rng(5);
    TensorD c(2, 12, 12), d(2, 12, 12);
    for (double& v : c.data) v = rng.uniform(0, 1);
    for (double& v : d.data) v = rng.uniform(0, 1);
    CHECK(psnr(c, d) == psnr(d, c));
    CHECK_THROWS_AS(psnr(a, TensorD(4, 8, 8, 0.0)), contract_error);
}

TEST_CASE("ssim basics") {
    Rng rng(6);
    TensorD a(1, 16, 16);
    for (double& v : a.data) v = rng.uniform(0.2, 0.8);
    CHECK(std::abs(ssim(a, a) - 1.0) < 1e-12);
    TensorD b = a;
    for (size_t i = 0; i < b.data.size(); i += 3) b.data[i] += 0.05;
    CHECK(ssim(a, b) < 1.0);
    CHECK(ssim(a, b) == ssim(b, a));
    CHECK(ssim(a, b) > -1.0);
    CHECK_THROWS_AS(ssim(TensorD(1, 10, 16, 0.5), TensorD(1, 10, 16, 0.5)), contract_error);
    CHECK_THROWS_AS(ssim(a, TensorD(1, 16, 12, 0.5)), contract_error);
}

TEST_CASE("metric values agree with independent references") {
    // structured 16x16 pattern with a deterministic perturbation
    TensorD a(1, 16, 16), b(1, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            double av = std::sin(0.3 * x + 0.1 * y) * 0.25 + 0.5;
            double bv = av + 0.1 * std::sin(1.7 * x * y + 0.3);
            a.at(0, y, x) = av;
            b.at(0, y, x) = std::min(1.0, std::max(0.0, bv));
        }
    CHECK(std::abs(ssim(a, b) - 0.7791203890830443) < 1e-7);
    CHECK(std::abs(psnr(a, b) - 23.196856260803823) < 1e-7);
}
