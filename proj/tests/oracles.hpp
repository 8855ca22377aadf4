#pragma once

// Test-side reference implementations, kept independent of the library code
// paths they check. The Mathieu oracle integrates the standard-form equation
//   y'' + (a - 2 q cos 2 xi) y = 0
// with velocity-Verlet over one period and reads the characteristic exponent
// off the monodromy trace. (The library solves a continued fraction instead.)

#include <cmath>
#include <optional>

namespace oracles {

inline constexpr double pi = 3.141592653589793238462643383279502884;

struct Monodromy {
    double trace;
    bool stable;
    std::optional<double> beta; // present when stable
};

inline Monodromy mathieu_monodromy(double a, double q, int nsteps = 200000) {
    auto stiffness = [a, q](double xi) { return a - 2.0 * q * std::cos(2.0 * xi); };
    const double h = pi / nsteps;
    double y1 = 1.0, v1 = 0.0;
    double y2 = 0.0, v2 = 1.0;
    double xi = 0.0;
    double k = stiffness(xi);
    auto acc1 = -k * y1, acc2 = -k * y2;
    for (int i = 0; i < nsteps; ++i) {
        y1 += h * v1 + 0.5 * h * h * acc1;
        y2 += h * v2 + 0.5 * h * h * acc2;
        xi += h;
        k = stiffness(xi);
        const double new_acc1 = -k * y1, new_acc2 = -k * y2;
        v1 += 0.5 * h * (acc1 + new_acc1);
        v2 += 0.5 * h * (acc2 + new_acc2);
        acc1 = new_acc1;
        acc2 = new_acc2;
    }
    Monodromy m{y1 + v2, false, std::nullopt};
    const double c = m.trace / 2.0;
    if (std::abs(c) <= 1.0) {
        m.stable = true;
        m.beta = std::acos(c) / pi;
    }
    return m;
}

inline double beta_floquet(double a, double q) {
    const auto m = mathieu_monodromy(a, q);
    return m.beta.value();
}

} // namespace oracles
