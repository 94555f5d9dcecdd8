#pragma once

#include <cmath>
#include <cstdint>

#include "dpotb/vec.hpp"

namespace dpotb::geometry {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

// Splittable deterministic generator (xoshiro256**). All sampling goes
// through this class so streams are bit-reproducible for a fixed seed,
// independent of the platform's std::*_distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    // Independent stream derived from this generator's seed and a tag.
    // Does not advance this generator.
    [[nodiscard]] Rng split(std::uint64_t tag) const {
        return Rng(mix64(seed_, tag));
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

    // Uniform in (0, 1]; never returns 0 so log() is always finite.
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via the Marsaglia polar method; spare value cached.
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

    // Gamma(shape, 1) via Marsaglia-Tsang rejection; requires shape >= 1.
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
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    Vec normal_vec(std::size_t dim) {
        Vec r(dim);
        for (double& x : r) x = normal();
        return r;
    }

    // Uniform direction on the unit sphere (d = 1 gives +/-1).
    Vec unit_vec(std::size_t dim) {
        for (;;) {
            Vec r = normal_vec(dim);
            const double n = norm2(r);
            if (n > 1e-12) {
                scale(r, 1.0 / n);
                return r;
            }
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::uint64_t state_[4]{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dpotb::geometry
