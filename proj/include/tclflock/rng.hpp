// Seeded random draws for population sampling. The engine is the standard
// mt19937_64 (bit-exact across platforms); the distributions are written
// out explicitly so sampled populations never depend on the C++ runtime's
// distribution internals.

#ifndef TCLFLOCK_RNG_HPP
#define TCLFLOCK_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string_view>

namespace tclflock {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix(seed)), seed_mix_(seed) {}

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller. Draws two uniforms per call; no
    /// caching, so the stream position is a fixed function of call count.
    double normal() {
        double u1 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    /// Truncated normal by rejection; clipping would pile mass on the bounds.
    double trunc_normal(double mean, double std, double lo, double hi) {
        if (!(lo < hi))
            throw std::invalid_argument("trunc_normal: degenerate truncation bounds");
        if (std == 0.0) {
            if (mean < lo || mean > hi)
                throw std::invalid_argument("trunc_normal: zero-spread mean outside bounds");
            return mean;
        }
        for (int i = 0; i < 100000; ++i) {
            const double z = normal(mean, std);
            if (z >= lo && z <= hi) return z;
        }
        throw std::runtime_error("trunc_normal: rejection failed to land in bounds");
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Decorrelated child stream for an independent sampling purpose, so
    /// adding draws to one purpose cannot shift another.
    Rng fork(std::string_view tag) const {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
        for (char c : tag) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 0x100000001b3ull;
        }
        return Rng(splitmix(seed_mix_) ^ h);
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 eng_;
    std::uint64_t seed_mix_ = 0;
};

}  // namespace tclflock

#endif
