#pragma once

#include <cmath>
#include <vector>

#include "rawscale/raw.hpp"
#include "rawscale/resample.hpp"
#include "rawscale/rng.hpp"

namespace rawscale {

// Analytic linear-RGB scene over the unit square: a DC base plus a seeded sum
// of band-limited sinusoids, axis-aligned gradients, and Gaussian blobs.
// Amplitudes are budgeted so values stay inside (0,1) without clamping, which
// keeps the field smooth and the LR point samples alias-free.
struct SceneSpec {
    double base[3] = {0.5, 0.5, 0.5};

    struct Sine {
        double amp[3]; // per-channel amplitude
        double fu, fv; // cycles per unit along u (x) and v (y)
        double phase;
    };
    std::vector<Sine> sines;

    double grad_u[3] = {0, 0, 0};
    double grad_v[3] = {0, 0, 0};

    struct Blob {
        double cu, cv, sigma;
        double amp[3];
    };
    std::vector<Blob> blobs;

    double eval(int ch, double u, double v) const {
        double s = base[ch] + grad_u[ch] * (u - 0.5) + grad_v[ch] * (v - 0.5);
        for (const Sine& w : sines) s += w.amp[ch] * std::sin(2 * M_PI * (w.fu * u + w.fv * v) + w.phase);
        for (const Blob& b : blobs) {
            double du = u - b.cu, dv = v - b.cv;
            s += b.amp[ch] * std::exp(-0.5 * (du * du + dv * dv) / (b.sigma * b.sigma));
        }
        return s;
    }

    // f_cap: per-axis frequency ceiling in cycles/unit (LR Nyquist with
    // safety). sigma_min: smallest blob width that stays smooth at LR pitch.
    static SceneSpec random(uint64_t seed, double f_cap_u, double f_cap_v, double sigma_min) {
        Rng rng(mix_seed(seed, 0x5ce7e));
        SceneSpec s;
        for (double& b : s.base) b = rng.uniform(0.35, 0.6);
        int n_sines = 2 + (int)(rng.next_u64() % 7); // 2..8
        for (int i = 0; i < n_sines; ++i) {
            Sine w;
            for (double& a : w.amp) a = rng.uniform(0.02, 0.12) * (rng.uniform() < 0.5 ? -1 : 1);
            w.fu = rng.uniform(0.5, f_cap_u);
            w.fv = rng.uniform(0.5, f_cap_v);
            w.phase = rng.uniform(0, 2 * M_PI);
            s.sines.push_back(w);
        }
        for (int ch = 0; ch < 3; ++ch) {
            s.grad_u[ch] = rng.uniform(-0.2, 0.2);
            s.grad_v[ch] = rng.uniform(-0.2, 0.2);
        }
        int n_blobs = (int)(rng.next_u64() % 4); // 0..3
        for (int i = 0; i < n_blobs; ++i) {
            Blob b;
            b.cu = rng.uniform(0.15, 0.85);
            b.cv = rng.uniform(0.15, 0.85);
            b.sigma = rng.uniform(sigma_min, std::max(sigma_min * 1.01, 0.3));
            for (double& a : b.amp) a = rng.uniform(-0.15, 0.2);
            s.blobs.push_back(b);
        }
        s.budget();
        return s;
    }

  private:
    void budget() {
        for (int ch = 0; ch < 3; ++ch) {
            double total = std::abs(grad_u[ch]) / 2 + std::abs(grad_v[ch]) / 2;
            for (const Sine& w : sines) total += std::abs(w.amp[ch]);
            for (const Blob& b : blobs) total += std::abs(b.amp[ch]);
            double room = std::min(base[ch] - 0.05, 0.95 - base[ch]);
            if (total > room && total > 0) {
                double f = room / total;
                grad_u[ch] *= f;
                grad_v[ch] *= f;
                for (Sine& w : sines) w.amp[ch] *= f;
                for (Blob& b : blobs) b.amp[ch] *= f;
            }
        }
    }
};

namespace detail {

// Point-sample the scene on an RGGB grid covering [0,1]^2 and convert to
// sensor units with optional Gaussian read noise (sigma in normalized units).
inline BayerFrame mosaic_scene(const SceneSpec& s, int bayer_h, int bayer_w, double noise_sigma,
                               uint64_t noise_seed) {
    BayerFrame f;
    f.width = bayer_w;
    f.height = bayer_h;
    f.samples.resize((size_t)bayer_w * bayer_h);
    Rng noise(noise_seed);
    double span = f.white_level - f.black_level;
    for (int y = 0; y < bayer_h; ++y)
        for (int x = 0; x < bayer_w; ++x) {
            int ch = (y % 2 == 0) ? (x % 2 == 0 ? 0 : 1) : (x % 2 == 0 ? 1 : 2);
            double u = (x + 0.5) / bayer_w, v = (y + 0.5) / bayer_h;
            double sig = s.eval(ch, u, v);
            if (noise_sigma > 0) sig += noise_sigma * noise.normal();
            double sensor = f.black_level + sig * span;
            f.at(y, x) = (float)std::min(std::max(sensor, 0.0), (double)f.white_level);
        }
    return f;
}

} // namespace detail

// Frequency ceiling per axis: sinusoid period must exceed 2*m/n HR pixel
// pitches (the LR Nyquist limit), with a 0.9 safety factor.
inline void synth_freq_caps(int packed_h, int packed_w, RationalScale sc, double& cap_u, double& cap_v) {
    int bayer_h = packed_h * 2, bayer_w = packed_w * 2;
    cap_u = 0.9 * bayer_w * sc.n / (2.0 * sc.m);
    cap_v = 0.9 * bayer_h * sc.n / (2.0 * sc.m);
}

// Renders the same continuous scene on the HR and LR Bayer grids (identical
// field of view), mosaics, adds per-frame noise, and packs both frames. The
// LR frame is exact ground truth by construction, not a resampled estimate.
inline PairedSample render_pair(const SceneSpec& scene, uint64_t seed, int packed_h, int packed_w,
                                RationalScale sc, double noise_sigma) {
    require(packed_h % sc.m == 0 && packed_w % sc.m == 0,
            strfmt("generate pair: packed dims %dx%d not divisible by m=%d", packed_h, packed_w, sc.m));
    int lr_h = packed_h * sc.n / sc.m, lr_w = packed_w * sc.n / sc.m;
    PairedSample p;
    p.scale = sc;
    p.scene_seed = seed;
    p.noise_sigma = noise_sigma;
    p.hr = pack_bayer(detail::mosaic_scene(scene, packed_h * 2, packed_w * 2, noise_sigma, mix_seed(seed, 1)));
    p.lr = pack_bayer(detail::mosaic_scene(scene, lr_h * 2, lr_w * 2, noise_sigma, mix_seed(seed, 2)));
    return p;
}

inline PairedSample generate_synthetic_pair(uint64_t seed, int packed_h, int packed_w, RationalScale sc,
                                            double noise_sigma) {
    double cap_u, cap_v;
    synth_freq_caps(packed_h, packed_w, sc, cap_u, cap_v);
    require(cap_u > 1.0 && cap_v > 1.0,
            strfmt("generate pair: dims %dx%d too small for band-limited content at scale %d/%d", packed_h,
                   packed_w, sc.n, sc.m));
    double lr_pitch = (double)sc.m / (sc.n * 2.0 * std::min(packed_h, packed_w));
    double sigma_min = std::max(0.05, 1.5 * lr_pitch);
    SceneSpec scene = SceneSpec::random(seed, cap_u, cap_v, sigma_min);
    return render_pair(scene, seed, packed_h, packed_w, sc, noise_sigma);
}

// Alternative ground truth for aliased-content experiments: Gaussian
// prefilter then Lanczos-3 per packed channel of the HR frame.
inline PairedSample generate_prefiltered_pair(uint64_t seed, int packed_h, int packed_w, RationalScale sc,
                                              double noise_sigma) {
    PairedSample p = generate_synthetic_pair(seed, packed_h, packed_w, sc, noise_sigma);
    double sigma = 0.5 * sc.m / sc.n;
    TensorF blurred = gaussian_blur(p.hr, sigma);
    p.lr = interpolate_resample(blurred, sc, ResampleKernel::lanczos3);
    for (float& v : p.lr.data) v = std::min(std::max(v, 0.0f), 1.0f);
    p.lr_mode = "prefiltered";
    return p;
}

} // namespace rawscale
