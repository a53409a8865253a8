#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace gradapt {

// splitmix64; used for seeding and stream derivation.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic RNG (xoshiro256**). All randomness in the library flows
/// through this type so that results are reproducible bit-for-bit across
/// runs; no std::random distributions are used anywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (no cached spare, keeps the stream
    /// position a simple function of the call count).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    /// Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<int> permutation(int n) {
        std::vector<int> p(n);
        std::iota(p.begin(), p.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(below(static_cast<std::uint64_t>(i) + 1));
            std::swap(p[i], p[j]);
        }
        return p;
    }

private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
};

/// Derives an independent stream seed from a master seed and a tuple of
/// integer components (sweep coordinates, step indices, ...). The result
/// depends only on the component values, so adding sweep points never
/// perturbs the streams of existing ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> components) {
    std::uint64_t s = master ^ 0x6a09e667f3bcc909ULL;
    splitmix64_next(s);
    for (std::uint64_t c : components) {
        s ^= splitmix64_next(s) + c;
        splitmix64_next(s);
    }
    return splitmix64_next(s);
}

}  // namespace gradapt
