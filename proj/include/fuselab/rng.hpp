#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fuselab {

/// Deterministic random source.
///
/// std::mt19937_64 produces an identical bit stream on every conforming
/// implementation, but the standard <random> distributions do not, so all
/// sampling here is hand-rolled on top of raw 64-bit draws. Every consumer
/// of randomness in the library goes through this class.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a log() argument.
    double uniform01_open() {
        return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). Rejection from the top keeps it unbiased.
    uint64_t below(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (cosine branch only, so every call
    /// consumes exactly two draws).
    double normal() {
        const double u1 = uniform01_open();
        const double u2 = uniform01();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    /// Gamma(shape, 1) for shape >= 1 (Marsaglia-Tsang squeeze).
    double gamma(double shape) {
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// log of a Gamma(shape, 1) draw; usable for shapes far below 1, where a
    /// direct draw underflows to zero. Uses the shape-boosting identity
    /// G(a) ~ G(a+1) * U^(1/a).
    double log_gamma_draw(double shape) {
        if (shape >= 1.0) return std::log(gamma(shape));
        const double g = gamma(shape + 1.0);
        const double u = uniform01_open();
        return std::log(g) + std::log(u) / shape;
    }

    /// Proportions from a symmetric Dirichlet(alpha, ..., alpha) over n parts.
    /// Evaluated in log space so extreme concentrations (alpha ~ 5e-4) do not
    /// collapse to 0/0; the result always sums to 1.
    std::vector<double> dirichlet(double alpha, size_t n) {
        std::vector<double> lg(n);
        double m = -HUGE_VAL;
        for (size_t i = 0; i < n; ++i) {
            lg[i] = log_gamma_draw(alpha);
            if (lg[i] > m) m = lg[i];
        }
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            lg[i] = std::exp(lg[i] - m);
            sum += lg[i];
        }
        for (size_t i = 0; i < n; ++i) lg[i] /= sum;
        return lg;
    }

    /// Fisher-Yates with owned integer draws.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 eng_;
};

/// Stable derivation of sub-seeds from a base seed and a stream tag
/// (splitmix64 finalizer over the pair).
inline uint64_t mix_seed(uint64_t base, uint64_t stream) {
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace fuselab
