#pragma once

#include <cmath>
#include <cstdint>

namespace dcprox {

// xoshiro256++ 1.0 (Blackman & Vigna, public domain), state expanded from a
// 64-bit seed through splitmix64. Self-contained so that a given seed yields
// the same stream on every platform and standard library.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        for (auto& word : state_) word = splitmix64(seed);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, bound), bound >= 1, by rejection sampling.
    std::uint64_t uniform_below(std::uint64_t bound) {
        const std::uint64_t min = (-bound) % bound;
        std::uint64_t r = next();
        while (r < min) r = next();
        return r % bound;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4];
};

// Standard normal stream. Box-Muller pairs are consumed in a fixed order
// (cosine value first, sine value cached for the next call), which pins the
// exact sequence of draws for reproducible instance generation.
class GaussianStream {
public:
    explicit GaussianStream(Xoshiro256pp& rng) : rng_(&rng) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // first uniform mapped into (0, 1] so the log stays finite
        const double u1 = (static_cast<double>(rng_->next() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(rng_->next() >> 11) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Drops a cached half-pair; used between generation phases so each phase
    // starts on a pair boundary.
    void reset_pair() { have_spare_ = false; }

private:
    Xoshiro256pp* rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dcprox
