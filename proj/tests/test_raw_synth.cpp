#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rawscale/nraw.hpp"
#include "rawscale/synth.hpp"

using namespace rawscale;

namespace {

std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("pack_bayer site mapping and normalization") {
    BayerFrame f;
    f.width = 4;
    f.height = 2;
    f.black_level = 64;
    f.white_level = 1023;
    //   R   G1  R   G1
    //   G2  B   G2  B
    f.samples = {100, 200, 300, 400, 500, 600, 700, 1100};
    TensorF p = pack_bayer(f);
    CHECK(p.c == 4);
    CHECK(p.h == 1);
    CHECK(p.w == 2);
    float span = 1023 - 64;
    CHECK(p.at(0, 0, 0) == doctest::Approx((100 - 64) / span).epsilon(1e-6)); // R
    CHECK(p.at(1, 0, 0) == doctest::Approx((200 - 64) / span).epsilon(1e-6)); // G1
    CHECK(p.at(2, 0, 0) == doctest::Approx((500 - 64) / span).epsilon(1e-6)); // G2
    CHECK(p.at(3, 0, 0) == doctest::Approx((600 - 64) / span).epsilon(1e-6)); // B
    CHECK(p.at(0, 0, 1) == doctest::Approx((300 - 64) / span).epsilon(1e-6));
    CHECK(p.at(3, 0, 1) == 1.0f); // 1100 clamps at white
    BayerFrame odd = f;
    odd.width = 3;
    CHECK_THROWS_AS(pack_bayer(odd), contract_error);
    BayerFrame bad = f;
    bad.white_level = 64;
    CHECK_THROWS_AS(pack_bayer(bad), contract_error);
}

TEST_CASE("unpack inverts pack in normalized units") {
    BayerFrame f;
    f.width = 8;
    f.height = 6;
    f.black_level = 0;
    f.white_level = 1;
    Rng rng(3);
    f.samples.resize(48);
    for (auto& v : f.samples) v = (float)rng.uniform();
    TensorF p = pack_bayer(f);
    BayerFrame back = unpack_bayer(p);
    CHECK(back.width == 8);
    for (size_t i = 0; i < f.samples.size(); ++i)
        CHECK(back.samples[i] == doctest::Approx(f.samples[i]).epsilon(1e-6));
    CHECK_THROWS_AS(unpack_bayer(TensorF(3, 2, 2)), contract_error);
}

TEST_CASE("scene sampler determinism and range budget") {
    SceneSpec a = SceneSpec::random(9, 6.0, 6.0, 0.1);
    SceneSpec b = SceneSpec::random(9, 6.0, 6.0, 0.1);
    double lo = 1e9, hi = -1e9;
    for (int ch = 0; ch < 3; ++ch)
        for (int i = 0; i < 64; ++i)
            for (int j = 0; j < 64; ++j) {
                double u = (j + 0.5) / 64, v = (i + 0.5) / 64;
                double va = a.eval(ch, u, v);
                CHECK(va == b.eval(ch, u, v));
                lo = std::min(lo, va);
                hi = std::max(hi, va);
            }
    // detail amplitudes are rescaled, not clamped, so scenes stay smooth
    CHECK(lo > 0.05);
    CHECK(hi < 0.95);
    // different seeds give different content
    SceneSpec c = SceneSpec::random(10, 6.0, 6.0, 0.1);
    CHECK(a.eval(0, 0.31, 0.57) != c.eval(0, 0.31, 0.57));
}

TEST_CASE("noise-free mosaic recovers the scene at sample sites") {
    SceneSpec sc = SceneSpec::random(21, 4.0, 4.0, 0.1);
    TensorF p = pack_bayer(detail::mosaic_scene(sc, 8, 8, 0.0, 77));
    // packed channel 0 = R sites at (2y, 2x); site centers ((x+0.5)/w, (y+0.5)/h)
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            double u = (2 * x + 0.5) / 8.0, v = (2 * y + 0.5) / 8.0;
            CHECK(p.at(0, y, x) == doctest::Approx(sc.eval(0, u, v)).epsilon(2e-6));
            double ug = (2 * x + 1.5) / 8.0;
            CHECK(p.at(1, y, x) == doctest::Approx(sc.eval(1, ug, v)).epsilon(2e-6));
            double vb = (2 * y + 1.5) / 8.0;
            CHECK(p.at(3, y, x) == doctest::Approx(sc.eval(2, (2 * x + 1.5) / 8.0, vb)).epsilon(2e-6));
        }
}

TEST_CASE("paired generation: dims, determinism, noise") {
    RationalScale sc = make_scale(1, 2);
    PairedSample p = generate_synthetic_pair(5, 32, 48, sc, 0.0);
    CHECK(p.hr.c == 4);
    CHECK(p.hr.h == 32);
    CHECK(p.hr.w == 48);
    CHECK(p.lr.h == 16);
    CHECK(p.lr.w == 24);
    CHECK(p.scale == sc);
    CHECK(p.lr_mode == "analytic");
    PairedSample q = generate_synthetic_pair(5, 32, 48, sc, 0.0);
    CHECK(max_abs_diff(p.hr, q.hr) == 0.0);
    CHECK(max_abs_diff(p.lr, q.lr) == 0.0);
    // noise changes samples but stays bounded by the clamp
    PairedSample n = generate_synthetic_pair(5, 32, 48, sc, 0.02);
    CHECK(max_abs_diff(p.hr, n.hr) > 0.0);
    for (float v : n.hr.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    // rational scale with m=13 needs m-divisible packed dims
    CHECK_THROWS_AS(generate_synthetic_pair(5, 32, 48, make_scale(10, 13), 0.0), contract_error);
    PairedSample r13 = generate_synthetic_pair(5, 26, 52, make_scale(10, 13), 0.0);
    CHECK(r13.lr.h == 20);
    CHECK(r13.lr.w == 40);
    // tiny frames cannot carry band-limited content
    CHECK_THROWS_AS(generate_synthetic_pair(5, 2, 2, sc, 0.0), contract_error);
}

TEST_CASE("analytic pair: lr is the scene at lr sites, not a resample") {
    PairedSample p = generate_synthetic_pair(33, 24, 24, make_scale(1, 2), 0.0);
    SceneSpec sc = SceneSpec::random(33, 0, 0, 0); // wrong caps; only for api shape
    (void)sc;
    // regenerate the scene exactly as the generator does
    double cap_u, cap_v;
    synth_freq_caps(24, 24, make_scale(1, 2), cap_u, cap_v);
    double lr_pitch = 2.0 / (2.0 * 24.0);
    SceneSpec scene = SceneSpec::random(33, cap_u, cap_v, std::max(0.05, 1.5 * lr_pitch));
    for (int y = 0; y < p.lr.h; ++y)
        for (int x = 0; x < p.lr.w; ++x) {
            double u = (2 * x + 0.5) / 24.0, v = (2 * y + 0.5) / 24.0;
            CHECK(p.lr.at(0, y, x) == doctest::Approx(scene.eval(0, u, v)).epsilon(2e-6));
        }
}

TEST_CASE("prefiltered pair differs and is flagged") {
    PairedSample a = generate_synthetic_pair(8, 32, 32, make_scale(1, 2), 0.0);
    PairedSample b = generate_prefiltered_pair(8, 32, 32, make_scale(1, 2), 0.0);
    CHECK(max_abs_diff(a.hr, b.hr) == 0.0); // same HR frame
    CHECK(max_abs_diff(a.lr, b.lr) > 0.0);  // different LR ground truth
    CHECK(b.lr_mode == "prefiltered");
}

TEST_CASE("nraw roundtrips are bit-exact") {
    std::string path = tmp_path("rs_test_packed.nraw");
    Rng rng(17);
    TensorF t(4, 6, 8);
    for (float& v : t.data) v = (float)rng.uniform();
    nraw_write_packed(path, t, make_scale(2, 3), 0.01, 99);
    NrawFile f = nraw_read(path);
    CHECK(f.kind == "packed");
    CHECK(max_abs_diff(f.packed, t) == 0.0);
    REQUIRE(f.scale.has_value());
    CHECK(f.scale->n == 2);
    CHECK(f.scale->m == 3);
    CHECK(f.noise_sigma == 0.01);
    CHECK(f.seed == 99);
    CHECK(f.cfa == "RGGB");

    PairedSample p = generate_synthetic_pair(4, 16, 16, make_scale(1, 2), 0.005);
    std::string pp = tmp_path("rs_test_pair.nraw");
    nraw_write_pair(pp, p);
    NrawFile g = nraw_read(pp);
    CHECK(g.kind == "pair");
    REQUIRE(g.lr.has_value());
    CHECK(max_abs_diff(g.packed, p.hr) == 0.0);
    CHECK(max_abs_diff(*g.lr, p.lr) == 0.0);
    CHECK(g.lr_mode == "analytic");
    std::remove(path.c_str());
    std::remove(pp.c_str());
}

TEST_CASE("nraw rejects malformed files") {
    std::string path = tmp_path("rs_test_bad.nraw");
    auto write_bytes = [&](const std::string& bytes) {
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), (std::streamsize)bytes.size());
    };
    write_bytes("WHAT1 {}\n");
    CHECK_THROWS_AS(nraw_read(path), io_error);
    write_bytes("NRAW1 not-json\n");
    CHECK_THROWS_AS(nraw_read(path), io_error);
    write_bytes("NRAW1 {\"kind\":\"packed\",\"dtype\":\"f32le\"}\n");
    CHECK_THROWS_AS(nraw_read(path), io_error); // dims missing
    write_bytes("NRAW1 {\"kind\":\"packed\",\"dtype\":\"f32le\",\"dims\":{\"c\":1,\"h\":0,\"w\":2}}\n");
    CHECK_THROWS_AS(nraw_read(path), io_error); // bad dims
    // truncated payload: header promises 4 floats, provide 2
    std::string trunc = "NRAW1 {\"kind\":\"packed\",\"dtype\":\"f32le\",\"dims\":{\"c\":1,\"h\":2,\"w\":2}}\n";
    trunc += std::string("\x00\x00\x80\x3f\x00\x00\x80\x3f", 8);
    write_bytes(trunc);
    CHECK_THROWS_AS(nraw_read(path), io_error);
    // surplus payload
    std::string ok = "NRAW1 {\"kind\":\"packed\",\"dtype\":\"f32le\",\"dims\":{\"c\":1,\"h\":1,\"w\":1}}\n";
    ok += std::string("\x00\x00\x80\x3f\xff", 5);
    write_bytes(ok);
    CHECK_THROWS_AS(nraw_read(path), io_error);
    CHECK_THROWS_AS(nraw_read(tmp_path("rs_does_not_exist.nraw")), io_error);
    std::remove(path.c_str());
}
