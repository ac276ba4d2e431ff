// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace fedsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stable seed derivation: distinct (client, round, purpose) triples map to
// distinct streams under one master seed, identically on every platform.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t client_id,
                                 std::uint64_t round, std::string_view purpose) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ client_id);
    h = splitmix64(h ^ round);
    h = splitmix64(h ^ fnv1a64(purpose));
    return h;
}

// Seeded random source. All distributions are hand-derived from the raw
// mt19937_64 stream so draws are bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n), n > 0; rejection sampling to avoid modulo bias
    std::size_t below(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    // Laplace(0, scale) by inverse CDF of a uniform draw
    double laplace(double scale) {
        if (!(scale > 0.0)) throw std::invalid_argument("laplace: scale must be positive");
        const double u = uniform() - 0.5;
        const double sign = u < 0.0 ? -1.0 : 1.0;
        return -scale * sign * std::log1p(-2.0 * std::fabs(u));
    }

    // N(0, stddev^2) via Box-Muller (one value per pair, no cached state)
    double gaussian(double stddev) {
        if (!(stddev > 0.0)) throw std::invalid_argument("gaussian: stddev must be positive");
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Fisher-Yates; std::shuffle is implementation-defined, this is not
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace fedsim
