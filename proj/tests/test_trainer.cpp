#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rawscale/gradcheck.hpp"
#include "rawscale/synth.hpp"
#include "rawscale/trainer.hpp"

using namespace rawscale;

namespace {

ModelConfig train_cfg() {
    ModelConfig m;
    m.K = 2;
    m.c_base = 4;
    return m;
}

std::vector<PairedSample> tiny_dataset(int count) {
    std::vector<PairedSample> d;
    for (int i = 0; i < count; ++i) d.push_back(generate_synthetic_pair(100 + i, 32, 32, make_scale(1, 2), 0.005));
    return d;
}

bool stores_equal(const ParamStore<float>& a, const ParamStore<float>& b) {
    if (a.entries.size() != b.entries.size() || a.adam_steps != b.adam_steps) return false;
    for (size_t i = 0; i < a.entries.size(); ++i) {
        const auto& ea = a.entries[i];
        const auto& eb = b.entries[i];
        if (ea.name != eb.name) return false;
        if (max_abs_diff(ea.value, eb.value) != 0.0) return false;
        if (max_abs_diff(ea.m, eb.m) != 0.0) return false;
        if (max_abs_diff(ea.v, eb.v) != 0.0) return false;
    }
    return true;
}

struct TmpDir {
    std::string path;
    explicit TmpDir(const std::string& name) : path(name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TmpDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("learning rate staircase hits the advertised decimals exactly") {
    TrainConfig cfg; // lr0 1e-4, decay 0.8 every 40000
    CHECK(lr_schedule(0, cfg) == 1e-4);
    CHECK(lr_schedule(39999, cfg) == 1e-4);
    CHECK(lr_schedule(40000, cfg) == 8e-5);
    CHECK(lr_schedule(79999, cfg) == 8e-5);
    CHECK(lr_schedule(80000, cfg) == 6.4e-5);
    CHECK_THROWS_AS(lr_schedule(-1, cfg), contract_error);
    // beyond the exact-ratio window, falls back to pow
    CHECK(lr_schedule(23 * 40000, cfg) == doctest::Approx(1e-4 * std::pow(0.8, 23.0)).epsilon(1e-12));
    TrainConfig half = cfg;
    half.decay = 0.5;
    CHECK(lr_schedule(40000, half) == 5e-5);
}

TEST_CASE("adam update matches a frozen two-step trace") {
    ParamStore<float> ps;
    ps.add("p", TensorF(1, 1, 1, 1.0f));
    std::map<std::string, TensorF> g1{{"p", TensorF(1, 1, 1, 0.5f)}};
    std::map<std::string, TensorF> g2{{"p", TensorF(1, 1, 1, -0.25f)}};
    adam_step(ps, g1, 1e-3);
    adam_step(ps, g2, 1e-3);
    const auto& e = ps.at("p");
    CHECK((double)e.value.data[0] == 0.9987336993217468);
    CHECK((double)e.m.data[0] == 0.020000001415610313);
    CHECK((double)e.v.data[0] == 0.0003122500202152878);
    CHECK(ps.adam_steps == 2);

    // shape mismatch and unknown names are rejected
    std::map<std::string, TensorF> bad{{"p", TensorF(1, 2, 1, 0.0f)}};
    CHECK_THROWS_AS(adam_step(ps, bad, 1e-3), contract_error);
    std::map<std::string, TensorF> unknown{{"q", TensorF(1, 1, 1, 0.0f)}};
    CHECK_THROWS_AS(adam_step(ps, unknown, 1e-3), contract_error);

    // an empty gradient map advances the step counter but touches nothing
    float before = ps.at("p").value.data[0];
    adam_step(ps, {}, 1e-3);
    CHECK(ps.at("p").value.data[0] == before);
}

TEST_CASE("checkpoint roundtrip is bit exact") {
    ModelConfig mc = train_cfg();
    Checkpoint ck;
    ck.iteration = 137;
    ck.config = nlohmann::json{{"model", model_config_to_json(mc)}, {"train", train_config_to_json(TrainConfig{})}};
    ck.params = build_params<float>(mc, 11);
    ck.params.adam_steps = 137;
    Rng rng(13);
    for (auto& e : ck.params.entries) {
        for (float& v : e.m.data) v = (float)rng.uniform(-1, 1);
        for (float& v : e.v.data) v = (float)rng.uniform(0, 1);
    }
    const std::string path = "test_ck.nckpt";
    save_checkpoint(path, ck);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.iteration == 137);
    CHECK(back.config == ck.config);
    CHECK(stores_equal(back.params, ck.params));
    std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects damaged files") {
    ModelConfig mc;
    mc.K = 1;
    mc.c_base = 2;
    Checkpoint ck;
    ck.config = nlohmann::json{{"model", model_config_to_json(mc)}};
    ck.params = build_params<float>(mc, 2);
    const std::string path = "test_ck_bad.nckpt";
    save_checkpoint(path, ck);
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    is.close();
    std::string raw = ss.str();

    auto write_bytes = [&](const std::string& bytes) {
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), (std::streamsize)bytes.size());
    };

    write_bytes("WRONG1 " + raw.substr(7));
    CHECK_THROWS_AS(load_checkpoint(path), io_error);

    write_bytes(raw.substr(0, raw.size() - 5)); // lop off payload bytes
    CHECK_THROWS_AS(load_checkpoint(path), io_error);

    write_bytes(raw + "x");
    CHECK_THROWS_AS(load_checkpoint(path), io_error);

    // flip one hex digit of the stored hash
    size_t pos = raw.find("\"config_hash\":\"");
    REQUIRE(pos != std::string::npos);
    std::string tampered = raw;
    char& c = tampered[pos + 15];
    c = c == '0' ? '1' : '0';
    write_bytes(tampered);
    CHECK_THROWS_AS(load_checkpoint(path), io_error);

    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint("no_such_file.nckpt"), io_error);
}

TEST_CASE("training is deterministic for a fixed seed") {
    ModelConfig mc = train_cfg();
    TrainConfig tc;
    tc.batch = 2;
    tc.seed = 3;
    auto data = tiny_dataset(3);
    auto run = [&]() {
        auto ps = build_params<float>(mc, 1);
        auto curve = train_loop(mc, tc, data, ps, 0, 4);
        return std::pair{std::move(ps), std::move(curve)};
    };
    auto [ps1, c1] = run();
    auto [ps2, c2] = run();
    REQUIRE(c1.size() == 4);
    for (size_t i = 0; i < c1.size(); ++i) {
        CHECK(c1[i].loss.total == c2[i].loss.total);
        CHECK(c1[i].loss.con == c2[i].loss.con);
        CHECK(c1[i].lr == c2[i].lr);
        CHECK(c1[i].iter == (long)i + 1);
    }
    CHECK(stores_equal(ps1, ps2));
    // loss should be finite and positive on raw mosaics
    CHECK(c1[0].loss.total > 0.0);
    CHECK(std::isfinite(c1.back().loss.total));
}

TEST_CASE("resuming from a checkpoint reproduces the straight run") {
    ModelConfig mc = train_cfg();
    TrainConfig tc;
    tc.batch = 1;
    tc.seed = 5;
    auto data = tiny_dataset(2);

    auto straight = build_params<float>(mc, 4);
    auto curve_all = train_loop(mc, tc, data, straight, 0, 5);

    auto split = build_params<float>(mc, 4);
    auto curve_a = train_loop(mc, tc, data, split, 0, 2);
    Checkpoint ck;
    ck.iteration = 2;
    ck.config = nlohmann::json{{"model", model_config_to_json(mc)}, {"train", train_config_to_json(tc)}};
    ck.params = std::move(split);
    const std::string path = "test_resume.nckpt";
    save_checkpoint(path, ck);
    Checkpoint loaded = load_checkpoint(path);
    std::remove(path.c_str());
    auto curve_b = train_loop(mc, tc, data, loaded.params, loaded.iteration, 5);

    CHECK(stores_equal(straight, loaded.params));
    REQUIRE(curve_b.size() == 3);
    for (size_t i = 0; i < curve_b.size(); ++i) {
        CHECK(curve_b[i].loss.total == curve_all[i + 2].loss.total);
        CHECK(curve_b[i].iter == curve_all[i + 2].iter);
    }
    REQUIRE(curve_a.size() == 2);
    CHECK(curve_a[1].loss.total == curve_all[1].loss.total);
}

TEST_CASE("train loop input contracts") {
    ModelConfig mc = train_cfg();
    TrainConfig tc;
    auto ps = build_params<float>(mc, 1);
    std::vector<PairedSample> none;
    CHECK_THROWS_AS(train_loop(mc, tc, none, ps, 0, 1), contract_error);
    auto wrong = tiny_dataset(1);
    wrong[0].scale = make_scale(2, 3); // model only has 1/2
    CHECK_THROWS_AS(train_loop(mc, tc, wrong, ps, 0, 1), contract_error);
    auto ok = tiny_dataset(1);
    CHECK_THROWS_AS(train_loop(mc, tc, ok, ps, 3, 1), contract_error);
}

TEST_CASE("pair directory loader filters and sorts") {
    TmpDir tmp("test_pairs_dir");
    auto p1 = generate_synthetic_pair(1, 16, 16, make_scale(1, 2), 0.0);
    auto p2 = generate_synthetic_pair(2, 16, 16, make_scale(1, 2), 0.0);
    nraw_write_pair(tmp.path + "/b_sample.nraw", p2);
    nraw_write_pair(tmp.path + "/a_sample.nraw", p1);
    nraw_write_packed(tmp.path + "/not_a_pair.nraw", p1.hr);
    std::ofstream(tmp.path + "/readme.txt") << "ignore me\n";
    auto data = load_pair_dir(tmp.path);
    REQUIRE(data.size() == 2);
    CHECK(data[0].scene_seed == 1); // a_sample sorts first
    CHECK(data[1].scene_seed == 2);
    CHECK(max_abs_diff(data[0].hr, p1.hr) == 0.0);
    CHECK_THROWS_AS(load_pair_dir(tmp.path + "/missing"), io_error);
}

TEST_CASE("curve csv layout") {
    std::vector<CurveRow> rows(2);
    rows[0].iter = 1;
    rows[0].lr = 1e-4;
    rows[0].loss = LossReport{0.5, 0.25, 0.125, 0.7625};
    rows[1].iter = 2;
    rows[1].lr = 8e-5;
    rows[1].loss = LossReport{0.25, 0.125, 0.0625, 0.38125};
    const std::string path = "test_curve.csv";
    write_curve_csv(path, rows);
    std::ifstream is(path);
    std::string l0, l1, l2;
    std::getline(is, l0);
    std::getline(is, l1);
    std::getline(is, l2);
    CHECK(l0 == "iter,lr,l_con,l_hwc,l_em,l_total");
    CHECK(l1 == "1,0.0001,0.5,0.25,0.125,0.7625");
    CHECK(l2 == "2,8e-05,0.25,0.125,0.0625,0.38125");
    std::remove(path.c_str());
}

TEST_CASE("model gradients agree with finite differences on a small net") {
    ModelConfig mc;
    mc.K = 1;
    mc.c_base = 2;
    auto rep = grad_check_model(mc, make_scale(1, 2), 8, 8, 40, 2);
    CHECK(rep.pass);
    CHECK(rep.coords == 40);
    CHECK(rep.max_rel < 1e-4);
    CHECK(rep.topk_margin >= 1e-3);
    // the deliberately corrupted gradient must be caught
    auto bad = grad_check_model(mc, make_scale(1, 2), 8, 8, 40, 2, true);
    CHECK_FALSE(bad.pass);
    CHECK(bad.passed < bad.coords);
}
