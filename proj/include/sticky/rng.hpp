#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <boost/random/normal_distribution.hpp>

namespace sticky {

// SplitMix64 finalizer; used only for seed derivation, never as a sampler.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Sub-stream seed as a pure function of (master seed, module tag, replica index).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t index = 0) noexcept {
    return mix64(mix64(master ^ hash_tag(tag)) + mix64(index + 0x632be59bd9b4e019ULL));
}

/// A single random stream. Owns its engine; cheap to construct per replica.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : seed_(seed), engine_(seed) {}
    Stream(std::uint64_t master, std::string_view tag, std::uint64_t index = 0)
        : Stream(derive_seed(master, tag, index)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t bits() { return engine_(); }

    /// Child stream, deterministic in (this stream's seed, tag, index).
    Stream split(std::string_view tag, std::uint64_t index = 0) const {
        return Stream(seed_, tag, index);
    }

    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    // Ziggurat sampler; roughly twice as fast as std::normal_distribution.
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace sticky
