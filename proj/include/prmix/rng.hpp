#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace prmix {

/// Deterministic sub-seed derivation: SplitMix64 finalizer applied to
/// master + (stream+1) * golden-ratio increment. This function is part of
/// the reproducibility contract: replicate m of an ensemble is seeded with
/// derive_seed(plan_seed, m), replication r of a simulation with
/// derive_seed(master, r), so partial reruns and any parallel schedule
/// reproduce the exact same streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seeded random source. The engine is std::mt19937_64 (bit-exact sequence
/// fixed by the standard); all variate transforms are implemented here
/// rather than with std::*_distribution, whose output is
/// implementation-defined and would break cross-platform reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1], safe as a log argument.
    double uniform_open() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound) by rejection (unbiased).
    std::uint64_t uniform_below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) return r % bound;
        }
    }

    /// Standard normal, Marsaglia polar method with spare caching.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    /// Gamma(shape, rate 1), Marsaglia–Tsang; shape < 1 via the boost
    /// Gamma(a) = Gamma(a+1) * U^{1/a}.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            return g * std::pow(uniform_open(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_open();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Gamma(shape, rate).
    double gamma(double shape, double rate) { return gamma(shape) / rate; }

    /// Beta(a, b) via two gammas.
    double beta(double a, double b) {
        const double ga = gamma(a);
        const double gb = gamma(b);
        return ga / (ga + gb);
    }

    /// Student t with df degrees of freedom: Z / sqrt(chi2(df)/df).
    double student_t(double df) {
        const double z = normal();
        const double chi2 = 2.0 * gamma(df / 2.0);
        return z * std::sqrt(df / chi2);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace prmix
