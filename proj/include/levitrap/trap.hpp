#pragma once

#include <array>
#include <cmath>
#include <string>

#include "levitrap/core.hpp"

// Closed-form Paul-trap mathematics. The axial Mathieu parameters follow
//   q_z = 4 Q eta V0 / (m d^2 Omega^2),   a_z = 8 Q eta_dc U_dc / (m d^2 Omega^2),
// and the radial parameters carry the opposite sign at half magnitude, split
// by the radial asymmetry so that sum(a_i) = sum(q_i) = 0 (Laplace).
namespace levitrap {

struct MathieuPoint {
    std::array<double, 3> a{0.0, 0.0, 0.0};
    std::array<double, 3> q{0.0, 0.0, 0.0};
};

enum class BetaMethod { approx, exact };

inline MathieuPoint mathieu_parameters(const ParticleSpec& particle, const TrapConfig& trap) {
    const double d2w2 = trap.characteristic_distance * trap.characteristic_distance *
                        trap.drive_frequency * trap.drive_frequency;
    const double qz = 4.0 * particle.charge * trap.geometric_efficiency * trap.drive_amplitude /
                      (particle.mass * d2w2);
    const double az = 8.0 * particle.charge * trap.dc_geometric_efficiency * trap.dc_voltage /
                      (particle.mass * d2w2);
    const double eps = trap.radial_asymmetry;
    MathieuPoint mp;
    mp.q = {-(1.0 + eps) * qz / 2.0, -(1.0 - eps) * qz / 2.0, qz};
    mp.a = {-(1.0 + eps) * az / 2.0, -(1.0 - eps) * az / 2.0, az};
    return mp;
}

/// beta^2 ~= a + q^2/2, the lowest-order secular approximation.
inline double beta_approx(double a, double q) {
    const double b2 = a + 0.5 * q * q;
    if (b2 < 0.0)
        throw validation_error("beta_approx domain: a + q^2/2 must be >= 0 (got a=" +
                               std::to_string(a) + ", q=" + std::to_string(q) + ")");
    return std::sqrt(b2);
}

namespace detail {

// Characteristic-exponent residual from the tridiagonal Fourier recursion of
// the Mathieu equation. For u = sum C_2n exp(i(2n+beta) xi) the recursion
//   [a - (2n+beta)^2] C_2n = q (C_2n+2 + C_2n-2)
// yields F(beta) = beta^2 - a + q (G1 + H1) with the continued fractions
//   G_n = q / (a - (2n+beta)^2 - q G_n+1),  H_n = q / (a - (2n-beta)^2 - q H_n+1).
inline double mathieu_cf_residual(double beta, double a, double q, int depth = 40) {
    double g = 0.0, h = 0.0;
    for (int n = depth; n >= 1; --n) {
        const double dp = 2.0 * n + beta;
        const double dm = 2.0 * n - beta;
        g = q / (a - dp * dp - q * g);
        h = q / (a - dm * dm - q * h);
    }
    return beta * beta - a + q * (g + h);
}

} // namespace detail

/// Floquet characteristic exponent beta in (0, 1) for the first stability
/// region, solved from the standard continued-fraction characteristic
/// equation. Even in q. Throws numerical_error outside the stability region.
inline double beta_exact(double a, double q) {
    q = std::abs(q);
    if (q == 0.0) {
        if (a < 0.0)
            throw numerical_error("beta_exact: (a<0, q=0) lies outside the stability region");
        if (a > 1.0) throw numerical_error("beta_exact: (a>1, q=0) lies outside the first region");
        return std::sqrt(a);
    }
    const double lo_edge = 1e-9, hi_edge = 1.0 - 1e-9;
    // Bracket the root of the characteristic equation on (0, 1).
    const int ngrid = 400;
    double prev_b = lo_edge;
    double prev_f = detail::mathieu_cf_residual(prev_b, a, q);
    double lo = 0.0, hi = 0.0;
    bool bracketed = false;
    for (int i = 1; i <= ngrid; ++i) {
        const double b = lo_edge + (hi_edge - lo_edge) * double(i) / ngrid;
        const double f = detail::mathieu_cf_residual(b, a, q);
        if (std::isfinite(prev_f) && std::isfinite(f) && prev_f * f <= 0.0) {
            lo = prev_b;
            hi = b;
            bracketed = true;
            break;
        }
        prev_b = b;
        prev_f = f;
    }
    if (!bracketed)
        throw numerical_error("beta_exact: no characteristic exponent in (0,1); (a=" +
                              std::to_string(a) + ", q=" + std::to_string(q) +
                              ") is outside the stability region");
    double flo = detail::mathieu_cf_residual(lo, a, q);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = detail::mathieu_cf_residual(mid, a, q);
        if (fm == 0.0 || hi - lo < 1e-14) return mid;
        if (flo * fm <= 0.0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

namespace detail {

// First-region stability boundaries in a for given q (small-|a| series):
// lower boundary a0(q) (beta -> 0), upper boundary b1(q) (beta -> 1).
inline double mathieu_a0_boundary(double q) {
    const double q2 = q * q;
    return -q2 / 2.0 + 7.0 * q2 * q2 / 128.0;
}

inline double mathieu_b1_boundary(double q) {
    const double q2 = q * q;
    return 1.0 - q - q2 / 8.0 + q2 * q / 64.0 - q2 * q2 / 1536.0;
}

// Monodromy-matrix trace of u'' + (a + 2 q cos 2 xi) u = 0 over one period.
// |trace| <= 2 means a real characteristic exponent (stable).
inline double monodromy_trace(double a, double q, int nsteps = 4096) {
    auto accel = [a, q](double xi, double u) { return -(a + 2.0 * q * std::cos(2.0 * xi)) * u; };
    double y1 = 1.0, v1 = 0.0; // column 1
    double y2 = 0.0, v2 = 1.0; // column 2
    const double h = constants::pi / nsteps;
    double xi = 0.0;
    for (int i = 0; i < nsteps; ++i) {
        auto rk4 = [&](double& y, double& v) {
            const double k1y = v, k1v = accel(xi, y);
            const double k2y = v + 0.5 * h * k1v, k2v = accel(xi + 0.5 * h, y + 0.5 * h * k1y);
            const double k3y = v + 0.5 * h * k2v, k3v = accel(xi + 0.5 * h, y + 0.5 * h * k2y);
            const double k4y = v + h * k3v, k4v = accel(xi + h, y + h * k3y);
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        };
        rk4(y1, v1);
        rk4(y2, v2);
        xi += h;
    }
    return y1 + v2;
}

} // namespace detail

enum class StabilityMethod { bound, floquet };

/// Stability of a single (a, q) axis. The default `bound` method applies the
/// |q| <= 0.908 criterion with a small-|a| boundary correction (inclusive at
/// the boundary); `floquet` integrates the monodromy matrix.
inline bool is_stable(double a, double q, StabilityMethod method = StabilityMethod::bound) {
    q = std::abs(q);
    constexpr double tol = 1e-12;
    if (method == StabilityMethod::floquet) return std::abs(detail::monodromy_trace(a, q)) <= 2.0;
    if (q > 0.908 + tol) return false;
    return a >= detail::mathieu_a0_boundary(q) - tol && a <= detail::mathieu_b1_boundary(q) + tol;
}

inline bool is_stable(const MathieuPoint& mp, StabilityMethod method = StabilityMethod::bound) {
    for (int i = 0; i < 3; ++i)
        if (!is_stable(mp.a[i], mp.q[i], method)) return false;
    return true;
}

/// Secular frequencies omega_i = beta_i * Omega / 2 per axis [rad/s].
inline std::array<double, 3> secular_frequencies(const MathieuPoint& mp, double drive_frequency,
                                                 BetaMethod method = BetaMethod::approx) {
    std::array<double, 3> w{};
    for (int i = 0; i < 3; ++i) {
        const double beta = method == BetaMethod::approx ? beta_approx(mp.a[i], std::abs(mp.q[i]))
                                                         : beta_exact(mp.a[i], mp.q[i]);
        w[i] = beta * drive_frequency / 2.0;
    }
    return w;
}

} // namespace levitrap
