#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rawscale/isp.hpp"
#include "rawscale/resample.hpp"
#include "rawscale/rng.hpp"

using namespace rawscale;

namespace {

TensorD row(std::initializer_list<double> vals) {
    TensorD t(1, 1, (int)vals.size());
    std::copy(vals.begin(), vals.end(), t.data.begin());
    return t;
}

TensorD quad() { // [[1,2],[3,4]]
    TensorD t(1, 2, 2);
    t.data = {1, 2, 3, 4};
    return t;
}

} // namespace

TEST_CASE("nearest picks the top-left source on ties") {
    TensorD y = interpolate_resample(quad(), make_scale(1, 2), ResampleKernel::nearest);
    REQUIRE(y.size() == 1);
    CHECK(y.data[0] == 1.0);
    TensorD r = resample(row({10, 20, 30, 40}), 1, 2, ResampleKernel::nearest);
    CHECK(r.data[0] == 10.0);
    CHECK(r.data[1] == 30.0);
}

TEST_CASE("area averages the exact source footprint") {
    TensorD y = interpolate_resample(quad(), make_scale(1, 2), ResampleKernel::area);
    CHECK(y.data[0] == 2.5);
    // fractional footprints: 3 -> 2 of [1,2,3] is [4/3, 8/3]
    TensorD z = resample(row({1, 2, 3}), 1, 2, ResampleKernel::area);
    CHECK(std::abs(z.data[0] - 4.0 / 3.0) < 1e-14);
    CHECK(std::abs(z.data[1] - 8.0 / 3.0) < 1e-14);
    // integer footprint 4 -> 2
    TensorD w = resample(row({1, 3, 5, 7}), 1, 2, ResampleKernel::area);
    CHECK(w.data[0] == 2.0);
    CHECK(w.data[1] == 6.0);
}

TEST_CASE("bilinear identity and a hand-checked upsample") {
    TensorD x(2, 5, 7);
    Rng rng(3);
    for (double& v : x.data) v = rng.uniform(0, 1);
    CHECK(max_abs_diff(resample(x, 5, 7, ResampleKernel::bilinear), x) == 0.0);
    TensorD y = resample(quad(), 4, 4, ResampleKernel::bilinear);
    const double want[16] = {1, 1.25, 1.75, 2,    1.5, 1.75, 2.25, 2.5,
                             2.5, 2.75, 3.25, 3.5, 3,   3.25, 3.75, 4};
    for (int i = 0; i < 16; ++i) CHECK(y.data[i] == want[i]);
}

TEST_CASE("bicubic matches the closed-form taps") {
    TensorD y = resample(row({10, 20, 40, 80}), 1, 8, ResampleKernel::bicubic);
    const double want[8] = {9.296875, 11.5625, 16.5625, 23.828125, 33.359375, 49.53125, 72.34375, 82.8125};
    for (int i = 0; i < 8; ++i) CHECK(y.data[i] == want[i]); // all dyadic, exact
    // normalized taps preserve constants
    TensorD c(1, 6, 6, 0.37);
    TensorD cc = resample(c, 4, 9, ResampleKernel::bicubic);
    for (double v : cc.data) CHECK(std::abs(v - 0.37) < 1e-14);
}

TEST_CASE("lanczos3 minification stretches the kernel") {
    TensorD y = resample(row({0, 1, 2, 3, 4, 5}), 1, 3, ResampleKernel::lanczos3);
    CHECK(std::abs(y.data[0] - 0.4752158664939643) < 1e-9);
    CHECK(std::abs(y.data[1] - 2.5) < 1e-12);
    CHECK(std::abs(y.data[2] - 4.524784133506035) < 1e-9);
    TensorD c(1, 9, 5, 0.21);
    TensorD cc = resample(c, 3, 4, ResampleKernel::lanczos3);
    for (double v : cc.data) CHECK(std::abs(v - 0.21) < 1e-13);
}

TEST_CASE("rational resample contracts") {
    CHECK_THROWS_AS(interpolate_resample(TensorD(1, 3, 3, 0.0), make_scale(1, 2), ResampleKernel::area),
                    contract_error);
    CHECK_THROWS_AS(resample(quad(), 0, 2, ResampleKernel::area), contract_error);
    CHECK_THROWS_AS(parse_kernel("box"), contract_error);
    CHECK(parse_kernel("lanczos3") == ResampleKernel::lanczos3);
    // 26 -> 20 under 10/13 is integral
    TensorD x(1, 26, 26, 0.0);
    TensorD y = interpolate_resample(x, make_scale(10, 13), ResampleKernel::bilinear);
    CHECK(y.h == 20);
}

TEST_CASE("srgb transfer curve") {
    CHECK(srgb_oetf(0.0) == 0.0);
    CHECK(std::abs(srgb_oetf(1.0) - 1.0) < 1e-12);
    CHECK(std::abs(srgb_oetf(0.25) - 0.5370987304831942) < 1e-12);
    CHECK(std::abs(srgb_oetf(0.002) - 0.025840000000000002) < 1e-15); // linear segment
    CHECK(srgb_oetf(0.2) < srgb_oetf(0.3));
}

TEST_CASE("isp render: demosaic, balance, matrix, transfer") {
    TensorF packed(4, 2, 2, 0.25f);
    TensorF rgb = isp_render(packed);
    REQUIRE(rgb.c == 3);
    REQUIRE(rgb.h == 2);
    for (float v : rgb.data) CHECK(std::abs(v - 0.5370987304831942) < 1e-6);

    // greens are averaged before the matrix
    TensorF p2(4, 1, 1);
    p2.data = {0.0f, 0.2f, 0.4f, 0.0f};
    CHECK(std::abs(isp_render(p2).at(1, 0, 0) - srgb_oetf(0.3f)) < 1e-6);

    // white balance clamps at 1
    IspConfig wb;
    wb.wb[0] = 2.0;
    TensorF p3(4, 1, 1);
    p3.data = {0.6f, 0.0f, 0.0f, 0.0f};
    CHECK(std::abs(isp_render(p3, wb).at(0, 0, 0) - srgb_oetf(1.0)) < 1e-6);

    // ccm mixes channels
    IspConfig mix;
    mix.ccm[0][0] = 0.5;
    mix.ccm[0][1] = 0.5;
    TensorF p4(4, 1, 1);
    p4.data = {0.4f, 0.2f, 0.2f, 0.0f};
    CHECK(std::abs(isp_render(p4, mix).at(0, 0, 0) - srgb_oetf(0.3)) < 1e-6);

    // power-law transfer option
    IspConfig g;
    g.transfer = IspConfig::Transfer::gamma;
    g.gamma = 2.0;
    TensorF p5(4, 1, 1, 0.25f);
    CHECK(std::abs(isp_render(p5, g).at(0, 0, 0) - 0.5) < 1e-6);

    CHECK_THROWS_AS(isp_render(TensorF(3, 2, 2, 0.0f)), contract_error);
}

TEST_CASE("ppm bytes are pinned") {
    TensorF rgb(3, 2, 2);
    // (r,g,b) per pixel: (0,1,0.5), (0.25,-0.5,1.5), (0.998,0,1), (0.5,0.5,0.25)
    float r[4] = {0.0f, 0.25f, 0.998f, 0.5f};
    float g[4] = {1.0f, -0.5f, 0.0f, 0.5f};
    float b[4] = {0.5f, 1.5f, 1.0f, 0.25f};
    for (int i = 0; i < 4; ++i) {
        rgb.at(0, i / 2, i % 2) = r[i];
        rgb.at(1, i / 2, i % 2) = g[i];
        rgb.at(2, i / 2, i % 2) = b[i];
    }
    std::string path = "test_pinned.ppm";
    write_ppm(path, rgb);
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    std::string got = ss.str();
    std::string want = "P6\n2 2\n255\n";
    const unsigned char payload[12] = {0, 255, 128, 64, 0, 255, 254, 0, 255, 128, 128, 64};
    want.append(reinterpret_cast<const char*>(payload), 12);
    CHECK(got == want);
    std::remove(path.c_str());
    CHECK_THROWS_AS(write_ppm(path, TensorF(4, 2, 2, 0.0f)), contract_error);
}

TEST_CASE("gaussian blur preserves constants and sigma 0 is identity") {
    TensorD x(2, 7, 5, 0.625);
    TensorD y = gaussian_blur(x, 1.3);
    for (double v : y.data) CHECK(std::abs(v - 0.625) < 1e-13);
    TensorD z(1, 3, 3);
    Rng rng(9);
    for (double& v : z.data) v = rng.uniform(0, 1);
    CHECK(max_abs_diff(gaussian_blur(z, 0.0), z) == 0.0);
    TensorD w = gaussian_blur(z, 0.8);
    CHECK(max_abs_diff(w, z) > 0.0); // actually mixes
}
