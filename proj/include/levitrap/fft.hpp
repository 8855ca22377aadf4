#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "levitrap/constants.hpp"
#include "levitrap/core.hpp"

// Minimal FFT machinery for the spectral estimators: iterative radix-2
// Cooley-Tukey plus a Bluestein fallback so arbitrary segment lengths work.
namespace levitrap::detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse = false) {
    const std::size_t n = a.size();
    if (n < 2) return;
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * constants::pi / double(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto t = a[i + k + len / 2] * w;
                a[i + k] = u + t;
                a[i + k + len / 2] = u - t;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= double(n);
}

/// DFT of arbitrary length via the chirp-z (Bluestein) algorithm.
inline void fft_bluestein(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    std::vector<std::complex<double>> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // phase k^2 mod 2n keeps the argument bounded
        const double phase = constants::pi * double((k * k) % (2 * n)) / double(n);
        chirp[k] = std::complex<double>(std::cos(phase), -std::sin(phase));
    }
    std::vector<std::complex<double>> fa(m), fb(m);
    for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
    fft_radix2(fa);
    fft_radix2(fb);
    for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    fft_radix2(fa, true);
    for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * chirp[k];
}

inline void fft(std::vector<std::complex<double>>& a) {
    if (is_power_of_two(a.size()))
        fft_radix2(a);
    else
        fft_bluestein(a);
}

} // namespace levitrap::detail
