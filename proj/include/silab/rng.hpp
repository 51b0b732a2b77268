#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace silab {

// splitmix64 step; used to derive well-separated seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic seed for stream `stream` of a run keyed by `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t s = base ^ (0xA5A5A5A5DEADBEEFULL + stream * 0x9E3779B97F4A7C15ULL);
    splitmix64(s);
    return splitmix64(s);
}

// Seeded random source. A trial is fully determined by its seed; every
// consumer takes an Rng (or a seed) explicitly, never a global.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }

    double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

    std::vector<double> gaussian_vector(std::size_t dim, double stddev = 1.0) {
        std::vector<double> out(dim);
        std::normal_distribution<double> dist(0.0, stddev);
        for (auto& x : out) x = dist(engine_);
        return out;
    }

    // Independent generator for sub-stream `stream`; keeps trial-level
    // determinism when the number of draws in one stream changes.
    Rng spawn(std::uint64_t stream) const {
        return Rng(derive_seed(base_of_spawn_, stream));
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t base_of_spawn_ = engine_();
};

}  // namespace silab
