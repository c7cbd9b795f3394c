#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "rawscale/raw.hpp"

// `.nraw`: one ASCII header line `NRAW1 {json}\n`, then raw little-endian
// f32 payload(s), planar, channel-major, row-major within each channel. A
// "pair" file stores the HR payload followed by the LR payload.

namespace rawscale {

struct NrawFile {
    std::string kind; // "packed" | "pair"
    TensorF packed;   // payload ("packed") or HR payload ("pair")
    std::optional<TensorF> lr;
    std::optional<RationalScale> scale;
    std::string cfa = "RGGB";
    double noise_sigma = 0;
    uint64_t seed = 0;
    std::string lr_mode;
};

namespace detail {

inline void write_f32le(std::ostream& os, const TensorF& t) {
    static_assert(sizeof(float) == 4);
    // this codebase only targets little-endian hosts; fail loudly otherwise
    const uint16_t probe = 1;
    require(*reinterpret_cast<const uint8_t*>(&probe) == 1, "nraw: big-endian hosts unsupported");
    os.write(reinterpret_cast<const char*>(t.data.data()), (std::streamsize)(t.data.size() * 4));
}

inline TensorF read_f32le(std::istream& is, int c, int h, int w, const std::string& path) {
    TensorF t(c, h, w);
    is.read(reinterpret_cast<char*>(t.data.data()), (std::streamsize)(t.data.size() * 4));
    if ((size_t)is.gcount() != t.data.size() * 4)
        throw io_error("nraw: truncated payload in " + path);
    return t;
}

inline nlohmann::json dims_json(const TensorF& t) {
    return nlohmann::json{{"c", t.c}, {"h", t.h}, {"w", t.w}};
}

} // namespace detail

inline void nraw_write_packed(const std::string& path, const TensorF& t,
                              std::optional<RationalScale> scale = std::nullopt, double noise_sigma = 0,
                              uint64_t seed = 0) {
    nlohmann::json j{{"kind", "packed"}, {"dims", detail::dims_json(t)}, {"cfa", "RGGB"},
                     {"noise_sigma", noise_sigma}, {"seed", seed}, {"dtype", "f32le"}};
    if (scale) j["scale"] = {{"n", scale->n}, {"m", scale->m}};
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("nraw: cannot open for write: " + path);
    os << "NRAW1 " << j.dump() << "\n";
    detail::write_f32le(os, t);
    if (!os) throw io_error("nraw: write failed: " + path);
}

inline void nraw_write_pair(const std::string& path, const PairedSample& p) {
    nlohmann::json j{{"kind", "pair"},
                     {"dims", detail::dims_json(p.hr)},
                     {"lr_dims", detail::dims_json(p.lr)},
                     {"scale", {{"n", p.scale.n}, {"m", p.scale.m}}},
                     {"cfa", "RGGB"},
                     {"noise_sigma", p.noise_sigma},
                     {"seed", p.scene_seed},
                     {"lr_mode", p.lr_mode},
                     {"dtype", "f32le"}};
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("nraw: cannot open for write: " + path);
    os << "NRAW1 " << j.dump() << "\n";
    detail::write_f32le(os, p.hr);
    detail::write_f32le(os, p.lr);
    if (!os) throw io_error("nraw: write failed: " + path);
}

inline NrawFile nraw_read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("nraw: cannot open: " + path);
    std::string header;
    if (!std::getline(is, header)) throw io_error("nraw: missing header line in " + path);
    const std::string magic = "NRAW1 ";
    if (header.rfind(magic, 0) != 0) throw io_error("nraw: bad magic in " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header.substr(magic.size()));
    } catch (const nlohmann::json::exception& e) {
        throw io_error("nraw: malformed header json in " + path + ": " + e.what());
    }
    NrawFile f;
    try {
        f.kind = j.at("kind").get<std::string>();
        if (j.at("dtype").get<std::string>() != "f32le") throw io_error("nraw: unsupported dtype in " + path);
        auto d = j.at("dims");
        int c = d.at("c"), h = d.at("h"), w = d.at("w");
        if (c <= 0 || h <= 0 || w <= 0) throw io_error("nraw: bad dims in " + path);
        f.packed = detail::read_f32le(is, c, h, w, path);
        if (f.kind == "pair") {
            auto l = j.at("lr_dims");
            f.lr = detail::read_f32le(is, l.at("c"), l.at("h"), l.at("w"), path);
        } else if (f.kind != "packed") {
            throw io_error("nraw: unknown kind '" + f.kind + "' in " + path);
        }
        if (j.contains("scale"))
            f.scale = RationalScale{j["scale"].at("n").get<int>(), j["scale"].at("m").get<int>()};
        if (j.contains("cfa")) f.cfa = j["cfa"].get<std::string>();
        if (j.contains("noise_sigma")) f.noise_sigma = j["noise_sigma"].get<double>();
        if (j.contains("seed")) f.seed = j["seed"].get<uint64_t>();
        if (j.contains("lr_mode")) f.lr_mode = j["lr_mode"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw io_error("nraw: header fields missing or invalid in " + path + ": " + e.what());
    }
    // surplus bytes mean the header disagrees with the payload
    char extra;
    is.read(&extra, 1);
    if (is.gcount() != 0) throw io_error("nraw: payload longer than header dims in " + path);
    return f;
}

} // namespace rawscale
