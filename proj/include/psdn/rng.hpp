#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace psdn {

/// SplitMix64 finalizer (Steele, Lea, Flood). Used only to mix seeds.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Sub-seed for stream (a, b) under a master seed. Each index is hashed with
/// its own constant before mixing, so e.g. (image 2, patch 3) and
/// (image 3, patch 2) land in unrelated streams. Pure function of its
/// arguments; reproducible everywhere.
constexpr std::uint64_t derive_subseed(std::uint64_t master, std::uint64_t a, std::uint64_t b)
{
    return mix64(mix64(master ^ mix64(a ^ 0x9e3779b97f4a7c15ULL)) ^
                 mix64(b ^ 0xc2b2ae3d27d4eb4fULL));
}

/// Deterministic scalar sampler.
///
/// Engine: std::mt19937_64, whose output sequence is pinned bit-exactly by
/// the C++ standard. Uniforms take the top bits of one engine draw:
///   u01()      = (x >> 11) * 2^-53              in [0, 1)
///   u01_open() = ((x >> 12) + 0.5) * 2^-52      in (0, 1)
/// Normal variates use the Marsaglia polar method (reject (u,v) outside the
/// open unit disc, then scale by sqrt(-2 ln s / s); the second coordinate is
/// cached for the next call). Laplace variates invert the CDF. Identical
/// seeds give identical streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double u01_open()
    {
        return (static_cast<double>(eng_() >> 12) + 0.5) * 0x1.0p-52;
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * u01() - 1.0;
            v = 2.0 * u01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Zero-mean Laplace with the given scale (variance 2*scale^2).
    double laplace(double scale)
    {
        const double p = u01_open() - 0.5;
        const double sign = p < 0.0 ? -1.0 : 1.0;
        return -scale * sign * std::log1p(-2.0 * std::abs(p));
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace psdn
