#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace prefopt {

/// Deterministic random source. The engine is std::mt19937_64 (bit-exact by
/// the standard); all distributions are hand-rolled here because the standard
/// library's distribution objects are not guaranteed to produce identical
/// streams across implementations, and every seeded artifact output is
/// contractually reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, unbiased.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller, second draw cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    /// Fisher-Yates, in place.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace prefopt
