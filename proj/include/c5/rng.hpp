#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace c5 {

/// Deterministic random source. The engine is std::mt19937_64, whose
/// output sequence is fixed by the standard; the helpers below avoid the
/// implementation-defined std distributions so streams are bit-identical
/// across platforms.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Child stream for `(seed, ordinal)`, independent of how many values
    /// the parent has drawn.
    static Rng derive(std::uint64_t seed, std::uint64_t ordinal) {
        return Rng(mix(mix(seed) ^ (ordinal + 0x9E3779B97F4A7C15ULL)));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        // rejection sampling on the top of the range
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % bound;
    }

    /// Uniform in [lo, hi] inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <class T>
    void shuffle(std::vector<T> &items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

   private:
    std::mt19937_64 engine_;
};

}  // namespace c5
