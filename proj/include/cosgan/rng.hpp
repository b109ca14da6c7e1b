#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>

namespace cosgan {

// All randomness flows from one root seed through named sub-streams so that
// reordering unrelated draws cannot change results.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t substream_seed(std::uint64_t root, const std::string& name) {
    std::uint64_t h = fnv1a(name) ^ (root * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
    // splitmix64 finalizer
    h ^= h >> 30; h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 27; h *= 0x94D049BB133111EBULL;
    h ^= h >> 31;
    return h;
}

using RngEngine = std::mt19937_64;

inline RngEngine make_rng(std::uint64_t root, const std::string& name) {
    return RngEngine(substream_seed(root, name));
}

// Portable uniform in [0,1). std::uniform_real_distribution is
// implementation-defined; this is not.
inline double uniform01(RngEngine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(RngEngine& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller, deterministic across platforms for a given engine state.
inline double gaussian(RngEngine& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    while (u1 <= 1e-300) u1 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline std::uint64_t uniform_index(RngEngine& rng, std::uint64_t n) {
    // rejection sampling, unbiased
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
    std::uint64_t x;
    do { x = rng(); } while (x >= limit);
    return x % n;
}

// Named engine bank; serializable so checkpoints can resume bit-exactly.
class RngBank {
public:
    RngBank() = default;
    explicit RngBank(std::uint64_t root) : root_(root) {}

    std::uint64_t root() const { return root_; }

    RngEngine& stream(const std::string& name) {
        auto it = streams_.find(name);
        if (it == streams_.end())
            it = streams_.emplace(name, make_rng(root_, name)).first;
        return it->second;
    }

    std::string serialize() const {
        std::ostringstream os;
        os << root_ << "\n" << streams_.size() << "\n";
        for (const auto& [name, eng] : streams_)
            os << name << "\n" << eng << "\n";
        return os.str();
    }

    static RngBank deserialize(const std::string& blob) {
        std::istringstream is(blob);
        RngBank bank;
        std::size_t n = 0;
        is >> bank.root_ >> n;
        is.ignore();
        for (std::size_t i = 0; i < n; ++i) {
            std::string name;
            std::getline(is, name);
            RngEngine eng;
            is >> eng;
            is.ignore();
            bank.streams_.emplace(name, eng);
        }
        return bank;
    }

private:
    std::uint64_t root_ = 0;
    std::map<std::string, RngEngine> streams_;
};

}  // namespace cosgan
