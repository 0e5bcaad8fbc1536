#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace blbf {

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic RNG with fixed draw algorithms. std::uniform_*_distribution
/// is implementation-defined, so all draws are spelled out here; a given seed
/// yields the same stream on every platform.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Debiased multiply-shift (Lemire).
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = -n % n;
            while (lo < t) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

    /// Index draw from an unnormalized nonnegative weight vector (inverse CDF).
    int draw_discrete(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
            acc += weights[k];
            if (u < acc) return static_cast<int>(k);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    /// In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

   private:
    std::mt19937_64 engine_;
};

}  // namespace blbf
