#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace smi {

// Counter-splittable pseudo-random stream. Each (seed, stream) pair yields an
// independent deterministic sequence, so Monte Carlo replicate i can draw from
// substream(seed, i) and results never depend on scheduling or thread count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(mix(seed ^ 0x9E3779B97F4A7C15ULL))) {}

    static Rng substream(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed);
        r.state_ = mix(r.state_ ^ mix(stream * 0xA0761D6478BD642FULL + 0x8BB84B93962EACC9ULL));
        return r;
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // strictly inside (0,1)
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        spare_ = rad * std::sin(ang);
        have_spare_ = true;
        return rad * std::cos(ang);
    }

    // Marsaglia-Tsang, unit rate
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double gamma(double shape, double rate) { return gamma(shape) / rate; }

    double chi2(double df) { return 2.0 * gamma(0.5 * df); }

    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    // binomial by inversion; n here is small in every use (count tables)
    long binomial(long n, double p) {
        long s = 0;
        for (long i = 0; i < n; ++i)
            if (uniform() < p) ++s;
        return s;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace smi
