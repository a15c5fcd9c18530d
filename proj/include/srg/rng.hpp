#pragma once

#include <cmath>
#include <cstdint>

namespace srg {

/// splitmix64 generator. Hand-rolled instead of <random> distributions so that
/// seeded runs produce bit-identical streams on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.28318530717958647692;
        spare_ = r * std::sin(two_pi * u2);
        have_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

    /// Uniform integer in [0, n). Modulo bias is irrelevant at the scales used here.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    /// Independent child stream, stable across calls on the parent.
    Rng child(std::uint64_t salt) const {
        Rng r(state_ ^ (0xD1B54A32D192ED03ULL * (salt + 1)));
        r.next();
        return r;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace srg
