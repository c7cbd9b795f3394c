#include <doctest.h>

#include "rawscale/autodiff.hpp"
#include "rawscale/rng.hpp"
#include "rawscale/wavelet.hpp"

using namespace rawscale;

namespace {

TensorD rand_tensor(Rng& rng, int c, int h, int w) {
    TensorD t(c, h, w);
    for (double& v : t.data) v = rng.uniform(-1, 1);
    return t;
}

double sq_sum(const TensorD& t) {
    double s = 0;
    for (double v : t.data) s += v * v;
    return s;
}

} // namespace

TEST_CASE("haar 2x2 block values") {
    // block [[1,2],[3,4]]: orthonormal A=(1+2+3+4)/2, V=(1-2+3-4)/2, H=(1+2-3-4)/2, D=(1-2-3+4)/2
    TensorD x(1, 2, 2);
    x.data = {1, 2, 3, 4};
    Bands<double> b = dwt2d(x, HaarNorm::orthonormal);
    CHECK(b.A.data[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(b.V.data[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(b.H.data[0] == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(b.D.data[0] == doctest::Approx(0.0).epsilon(1e-15));
    // average convention divides the analysis by 4 so A is the block mean
    Bands<double> ba = dwt2d(x, HaarNorm::average);
    CHECK(ba.A.data[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(ba.V.data[0] == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(ba.H.data[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(ba.D.data[0] == doctest::Approx(0.0).epsilon(1e-15));
    // both conventions invert exactly
    CHECK(max_abs_diff(idwt2d(b, HaarNorm::orthonormal), x) < 1e-15);
    CHECK(max_abs_diff(idwt2d(ba, HaarNorm::average), x) < 1e-15);
}

TEST_CASE("roundtrip and energy preservation") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        int c = 1 + (int)(rng.next_u64() % 4);
        int h = 2 * (1 + (int)(rng.next_u64() % 8));
        int w = 2 * (1 + (int)(rng.next_u64() % 8));
        TensorD x = rand_tensor(rng, c, h, w);
        Bands<double> b = dwt2d(x);
        CHECK(b.A.h == h / 2);
        CHECK(b.A.w == w / 2);
        CHECK(max_abs_diff(idwt2d(b), x) < 1e-12);
        // orthonormal butterfly preserves the squared norm
        double ex = sq_sum(x);
        double eb = sq_sum(b.A) + sq_sum(b.V) + sq_sum(b.H) + sq_sum(b.D);
        CHECK(eb == doctest::Approx(ex).epsilon(1e-12));
        // the average convention inverts too, but is not orthonormal
        Bands<double> b2 = dwt2d(x, HaarNorm::average);
        CHECK(max_abs_diff(idwt2d(b2, HaarNorm::average), x) < 1e-12);
    }
    CHECK_THROWS_AS(dwt2d(TensorD(1, 3, 4)), contract_error);
    CHECK_THROWS_AS(dwt2d(TensorD(1, 4, 5)), contract_error);
}

TEST_CASE("constant image concentrates into A") {
    TensorD x(2, 8, 8, 0.75);
    Bands<double> b = dwt2d(x);
    for (double v : b.A.data) CHECK(v == doctest::Approx(1.5).epsilon(1e-15)); // gain 2 per level
    CHECK(sq_sum(b.V) + sq_sum(b.H) + sq_sum(b.D) == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("pyramid shapes and inversion") {
    Rng rng(12);
    TensorD x = rand_tensor(rng, 4, 48, 80);
    WaveletPyramid<double> p = dwt_pyramid(x, 3);
    REQUIRE(p.levels.size() == 3);
    CHECK(p.levels[0].A.h == 24);
    CHECK(p.levels[1].A.h == 12);
    CHECK(p.levels[2].A.h == 6);
    CHECK(p.levels[2].A.w == 10);
    CHECK(max_abs_diff(idwt_pyramid(p), x) < 1e-12);
    // level k+1 decomposes level k's approximation
    Bands<double> again = dwt2d(p.levels[0].A);
    CHECK(max_abs_diff(again.A, p.levels[1].A) < 1e-15);
    CHECK_THROWS_AS(dwt_pyramid(x, 5), contract_error); // 48 % 32 != 0
    CHECK_THROWS_AS(dwt_pyramid(x, 0), contract_error);
}

TEST_CASE("stacked layout matches band structs") {
    Rng rng(13);
    TensorD x = rand_tensor(rng, 3, 6, 4);
    Bands<double> b = dwt2d(x);
    TensorD stacked = stack_bands(b);
    CHECK(stacked.c == 12);
    Bands<double> back = split_bands(stacked);
    CHECK(max_abs_diff(back.H, b.H) == 0.0);
    // differentiable stacked ops agree with the plain transform
    ad::Tape<double> t;
    auto ys = ad::dwt_stacked(t.leaf(x), haar_analysis_scale<double>(HaarNorm::orthonormal));
    CHECK(max_abs_diff(ys.val(), stacked) < 1e-15);
    auto xr = ad::idwt_stacked(t.leaf(stacked), haar_synthesis_scale<double>(HaarNorm::orthonormal));
    CHECK(max_abs_diff(xr.val(), x) < 1e-12);
}

TEST_CASE("analysis/synthesis are mutually adjoint in gradients") {
    // for the orthonormal scaling, d(sum w*dwt(x))/dx == idwt(w)
    Rng rng(14);
    TensorD x = rand_tensor(rng, 1, 4, 4);
    TensorD w = rand_tensor(rng, 4, 2, 2);
    ad::Tape<double> t;
    auto xv = t.leaf(x, true);
    auto y = ad::dwt_stacked(xv, 0.5);
    t.backward(ad::sum_all(ad::mul(t.leaf(w), y)));
    TensorD expect = idwt_stacked_fwd(w, 0.5);
    CHECK(max_abs_diff(t.grad(xv.id), expect) < 1e-13);
}
