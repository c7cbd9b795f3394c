#pragma once

#include <map>
#include <string>
#include <vector>

#include "rawscale/kernels.hpp"
#include "rawscale/rng.hpp"
#include "rawscale/tensor.hpp"

namespace rawscale {

// Named, ordered learnable tensors plus Adam moment buffers. Registration
// order is the serialization order.
template <typename T>
struct ParamStore {
    struct Entry {
        std::string name;
        Tensor<T> value;
        Tensor<T> m, v; // Adam moments, same shape
    };
    std::vector<Entry> entries;
    std::map<std::string, int> index;
    long adam_steps = 0;

    bool has(const std::string& name) const { return index.count(name) != 0; }

    int add(const std::string& name, Tensor<T> t) {
        require(!has(name), "param '" + name + "' registered twice");
        int id = (int)entries.size();
        Tensor<T> zm(t.c, t.h, t.w), zv(t.c, t.h, t.w);
        entries.push_back(Entry{name, std::move(t), std::move(zm), std::move(zv)});
        index[name] = id;
        return id;
    }

    Entry& at(const std::string& name) {
        auto it = index.find(name);
        require(it != index.end(), "unknown param '" + name + "'");
        return entries[it->second];
    }
    const Entry& at(const std::string& name) const {
        auto it = index.find(name);
        require(it != index.end(), "unknown param '" + name + "'");
        return entries[it->second];
    }

    size_t total_size() const {
        size_t n = 0;
        for (const auto& e : entries) n += e.value.size();
        return n;
    }

    // Centered-uniform fan-in init (bound sqrt(6/fan_in)); biases zero. The
    // draw order is the registration order, so a seed pins every value.
    void register_conv(Rng& rng, const std::string& prefix, const ConvSpec& s) {
        Tensor<T> w(s.out_c, s.in_c, s.k * s.k);
        double bound = std::sqrt(6.0 / ((double)s.in_c * s.k * s.k));
        for (T& v : w.data) v = (T)rng.uniform(-bound, bound);
        add(prefix + ".w", std::move(w));
        if (s.bias) add(prefix + ".b", Tensor<T>(s.out_c, 1, 1));
    }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& e : entries) {
            out.add(e.name, e.value.template cast<U>());
            out.entries.back().m = e.m.template cast<U>();
            out.entries.back().v = e.v.template cast<U>();
        }
        out.adam_steps = adam_steps;
        return out;
    }
};

} // namespace rawscale
