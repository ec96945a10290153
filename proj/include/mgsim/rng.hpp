// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic random number generation with named substreams.
//
// Generator contract: xoshiro256++ cores seeded through splitmix64.
// Substreams are derived from a master seed and a chain of integer tags,
// so every replication / snapshot / component draws from an independent
// stream that is reproducible regardless of execution order or thread
// scheduling. Results are only comparable across builds that use the
// same generator family.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mgsim {

namespace detail {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// xoshiro256++ stream with convenience samplers. Value type, cheap to copy.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = detail::splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1], safe as a log() argument.
    double uniform01_open0() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (two fresh uniforms per draw).
    double normal() {
        const double u1 = uniform01_open0();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Normal(0, sigma^2) conditioned on [lo, hi] by rejection from the
    /// untruncated law.
    double truncated_normal(double sigma, double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("truncated_normal: empty support");
        for (;;) {
            const double x = sigma * normal();
            if (x >= lo && x <= hi) return x;
        }
    }

    /// Index sampled from a probability vector (inverse CDF walk).
    std::size_t pick(const std::vector<double>& probs) {
        double u = uniform01();
        for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
            u -= probs[k];
            if (u < 0.0) return k;
        }
        return probs.empty() ? 0 : probs.size() - 1;
    }

private:
    std::array<std::uint64_t, 4> state_{};
};

/// Derives the seed of a named substream from a master seed and tag chain.
/// Also usable as a stable content hash for small integer tuples.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = master ^ 0x6a09e667f3bcc908ULL;
    detail::splitmix64_next(h);
    for (std::uint64_t tag : tags) {
        h ^= tag + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        detail::splitmix64_next(h);
    }
    std::uint64_t s = h;
    return detail::splitmix64_next(s);
}

inline RandomStream substream(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    return RandomStream(derive_seed(master, tags));
}

}  // namespace mgsim
