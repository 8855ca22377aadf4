#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "levitrap/constants.hpp"

namespace levitrap {

namespace detail {

// SplitMix64 step; used for seed mixing / stream derivation only.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Derive an independent stream seed from (master seed, run index). Sweeps
/// seed each run with stream_seed(master, i) so runs are uncorrelated and
/// reproducible regardless of execution order.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t run_index) {
    std::uint64_t s = master ^ (0xa0761d6478bd642fULL + run_index * 0xe7037ed1a0b428dbULL);
    detail::splitmix64(s);
    return detail::splitmix64(s);
}

/// Deterministic random source: mt19937_64 core with explicit uniform and
/// Gaussian transforms. std::normal_distribution is implementation-defined,
/// so the Box-Muller transform is spelled out here to keep byte-identical
/// streams across compilers.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal deviate (Box-Muller, pair-cached).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * constants::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t raw() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace levitrap
