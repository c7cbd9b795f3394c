#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "rawscale/model.hpp"
#include "rawscale/nraw.hpp"
#include "rawscale/params.hpp"

namespace rawscale {

struct Checkpoint {
    long iteration = 0;
    nlohmann::json config; // full config document ({"model":..., "train":...})
    ParamStore<float> params;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    nlohmann::json tensors = nlohmann::json::array();
    long long offset = 0;
    for (const auto& e : ck.params.entries) {
        tensors.push_back({{"name", e.name},
                           {"c", e.value.c},
                           {"h", e.value.h},
                           {"w", e.value.w},
                           {"offset", offset}});
        offset += (long long)e.value.data.size();
    }
    nlohmann::json head{
        {"version", 1},
        {"iteration", ck.iteration},
        {"adam_steps", ck.params.adam_steps},
        {"config", ck.config},
        {"config_hash", config_hash(ck.config)},
        {"tensors", tensors},
    };
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("checkpoint: cannot open for writing: " + path);
    f << "NCKPT1 " << head.dump() << "\n";
    for (const auto& e : ck.params.entries) detail::write_f32le(f, e.value);
    for (const auto& e : ck.params.entries) detail::write_f32le(f, e.m);
    for (const auto& e : ck.params.entries) detail::write_f32le(f, e.v);
    if (!f) throw io_error("checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("checkpoint: cannot open: " + path);
    std::string magic(7, '\0');
    f.read(magic.data(), 7);
    if (!f || magic != "NCKPT1 ") throw io_error("checkpoint: bad magic in " + path);
    std::string header;
    if (!std::getline(f, header)) throw io_error("checkpoint: truncated header in " + path);
    nlohmann::json head;
    try {
        head = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("checkpoint: malformed header json: ") + e.what());
    }
    Checkpoint ck;
    try {
        ck.iteration = head.at("iteration").get<long>();
        ck.config = head.at("config");
        ck.params.adam_steps = head.at("adam_steps").get<long>();
        long long expect_off = 0;
        for (const auto& t : head.at("tensors")) {
            std::string name = t.at("name").get<std::string>();
            int c = t.at("c").get<int>(), h = t.at("h").get<int>(), w = t.at("w").get<int>();
            if (c < 1 || h < 1 || w < 1) throw io_error("checkpoint: bad tensor dims for " + name);
            if (t.at("offset").get<long long>() != expect_off)
                throw io_error("checkpoint: inconsistent tensor offsets for " + name);
            expect_off += (long long)c * h * w;
            typename ParamStore<float>::Entry e;
            e.name = name;
            e.value = Tensor<float>(c, h, w);
            e.m = Tensor<float>(c, h, w);
            e.v = Tensor<float>(c, h, w);
            ck.params.index[name] = ck.params.entries.size();
            ck.params.entries.push_back(std::move(e));
        }
        if (head.contains("config_hash") &&
            head.at("config_hash").get<std::string>() != config_hash(ck.config))
            throw io_error("checkpoint: config hash mismatch in " + path);
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("checkpoint: malformed header fields: ") + e.what());
    }
    auto get = [&](Tensor<float>& t) {
        f.read(reinterpret_cast<char*>(t.data.data()), (std::streamsize)(t.data.size() * 4));
        if ((size_t)f.gcount() != t.data.size() * 4)
            throw io_error("checkpoint: truncated payload in " + path);
    };
    for (auto& e : ck.params.entries) get(e.value);
    for (auto& e : ck.params.entries) get(e.m);
    for (auto& e : ck.params.entries) get(e.v);
    f.peek();
    if (!f.eof()) throw io_error("checkpoint: surplus bytes after payload in " + path);
    return ck;
}

} // namespace rawscale
