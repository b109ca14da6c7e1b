#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosgan/config.hpp"
#include "cosgan/rng.hpp"

namespace cosgan {

// Versioned checkpoint container: a JSON header describing every tensor,
// followed by raw little-endian doubles in header order. Loading on the same
// build resumes training bit-compatibly.
struct Checkpoint {
    RunConfig config;
    ParamStore generator;
    int generator_built_stage = 0;
    ParamStore discriminator;
    ProgressiveState state;
    long adam_steps_g = 0;
    long adam_steps_dd = 0;
    long adam_steps_dr = 0;
    long global_step = 0;
    int epoch = 0;
    std::string rng_blob;
};

namespace ckpt_detail {

constexpr char kMagic[4] = {'C', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

inline json store_header(const ParamStore& store) {
    json arr = json::array();
    for (const auto& [name, p] : store.all()) {
        arr.push_back(json{{"name", name},
                           {"shape", p.value.shape()},
                           {"trainable", p.trainable},
                           {"has_adam", p.adam_m.numel() == p.value.numel()}});
    }
    return arr;
}

inline void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(Scalar)));
}

inline Tensor read_tensor(std::istream& is, const std::vector<int>& shape) {
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(Scalar)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    return t;
}

inline void write_store(std::ostream& os, const ParamStore& store) {
    for (const auto& [name, p] : store.all()) {
        write_tensor(os, p.value);
        if (p.adam_m.numel() == p.value.numel()) {
            write_tensor(os, p.adam_m);
            write_tensor(os, p.adam_v);
        }
    }
}

inline void read_store(std::istream& is, const json& header, ParamStore& store) {
    for (const auto& entry : header) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int>>();
        Parameter& p = store.create(name, read_tensor(is, shape),
                                    entry.at("trainable").get<bool>());
        if (entry.at("has_adam").get<bool>()) {
            p.adam_m = read_tensor(is, shape);
            p.adam_v = read_tensor(is, shape);
        }
    }
}

}  // namespace ckpt_detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    using namespace ckpt_detail;
    json header{{"version", kVersion},
                {"config", ck.config},
                {"generator", store_header(ck.generator)},
                {"generator_built_stage", ck.generator_built_stage},
                {"discriminator", store_header(ck.discriminator)},
                {"state", {{"stage", ck.state.stage},
                           {"fade_alpha", ck.state.fade_alpha},
                           {"resolution", ck.state.resolution}}},
                {"adam_steps", {ck.adam_steps_g, ck.adam_steps_dd, ck.adam_steps_dr}},
                {"global_step", ck.global_step},
                {"epoch", ck.epoch},
                {"rng", ck.rng_blob}};
    const std::string hs = header.dump();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    os.write(kMagic, 4);
    std::uint64_t len = hs.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    write_store(os, ck.generator);
    write_store(os, ck.discriminator);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::invalid_argument("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::invalid_argument("checkpoint: bad magic in " + path +
                                    " (not a checkpoint file)");
    std::uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string hs(len, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(len));
    if (!is) throw std::invalid_argument("checkpoint: truncated header in " + path);
    json header = json::parse(hs, nullptr, false);
    if (header.is_discarded())
        throw std::invalid_argument("checkpoint: corrupt header in " + path);
    const auto version = header.at("version").get<std::uint32_t>();
    if (version != kVersion)
        throw std::invalid_argument("checkpoint: unsupported version " +
                                    std::to_string(version) + " (expected " +
                                    std::to_string(kVersion) + ")");
    Checkpoint ck;
    header.at("config").get_to(ck.config);
    ck.generator_built_stage = header.at("generator_built_stage").get<int>();
    ck.state.stage = header.at("state").at("stage").get<int>();
    ck.state.fade_alpha = header.at("state").at("fade_alpha").get<Scalar>();
    ck.state.resolution = header.at("state").at("resolution").get<int>();
    const auto steps = header.at("adam_steps");
    ck.adam_steps_g = steps.at(0).get<long>();
    ck.adam_steps_dd = steps.at(1).get<long>();
    ck.adam_steps_dr = steps.at(2).get<long>();
    ck.global_step = header.at("global_step").get<long>();
    ck.epoch = header.at("epoch").get<int>();
    ck.rng_blob = header.at("rng").get<std::string>();
    read_store(is, header.at("generator"), ck.generator);
    read_store(is, header.at("discriminator"), ck.discriminator);
    return ck;
}

}  // namespace cosgan
