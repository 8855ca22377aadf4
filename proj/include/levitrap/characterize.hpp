#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "levitrap/optim.hpp"
#include "levitrap/trap.hpp"

// Parameter-extraction pipelines: charge-to-mass from an omega_z(V0) scan,
// radius/mass from a gamma(P) scan.
namespace levitrap {

struct QmScanPoint {
    double drive_amplitude = 0.0; // V zero-to-peak
    double omega_z = 0.0;         // rad/s
};

struct QmFit {
    double charge_to_mass = 0.0; // C/kg
    double standard_error = 0.0; // C/kg
    std::vector<QmScanPoint> scan_points;
    std::string model = "approx"; // approx | exact
};

struct PressureScanPoint {
    double pressure = 0.0; // Pa
    double gamma = 0.0;    // 1/s
};

struct RadiusFit {
    double slope = 0.0;  // 1/(s Pa)
    double slope_error = 0.0;
    double intercept = 0.0;       // 1/s (0 unless free_intercept)
    double radius = 0.0;          // m
    double mass = 0.0;            // kg
    double assumed_density = 0.0; // kg/m3
    bool standard_error_reliable = true;
    std::vector<PressureScanPoint> scan_points;
};

/// q_z produced by a charge-to-mass ratio at drive amplitude v0.
inline double qz_of(double charge_to_mass, double v0, const TrapConfig& trap) {
    return 4.0 * charge_to_mass * trap.geometric_efficiency * v0 /
           (trap.characteristic_distance * trap.characteristic_distance * trap.drive_frequency *
            trap.drive_frequency);
}

/// Least-squares Q/m from an axial-frequency vs drive-amplitude scan with
/// a_z = 0. The approx model is linear through the origin (omega ~ q/sqrt(2));
/// the exact model fits the full characteristic exponent.
inline QmFit fit_charge_to_mass(const std::vector<QmScanPoint>& points, const TrapConfig& trap,
                                BetaMethod model = BetaMethod::approx) {
    trap.validate();
    if (trap.dc_voltage != 0.0)
        throw validation_error("fit_charge_to_mass assumes no DC field (a_z = 0)");
    if (points.size() < 3)
        throw validation_error("fit_charge_to_mass needs at least 3 scan points");
    double v_min = points.front().drive_amplitude, v_max = v_min;
    for (const auto& pt : points) {
        if (!(pt.omega_z > 0.0))
            throw validation_error("fit_charge_to_mass: all omega_z must be > 0");
        v_min = std::min(v_min, pt.drive_amplitude);
        v_max = std::max(v_max, pt.drive_amplitude);
    }
    if (!(v_max > v_min))
        throw validation_error("fit_charge_to_mass: degenerate scan, all amplitudes equal");

    const double omega_drive = trap.drive_frequency;
    auto model_omega = [&](double qm, double v0) {
        const double qz = qz_of(qm, v0, trap);
        const double beta =
            model == BetaMethod::approx ? beta_approx(0.0, qz) : beta_exact(0.0, qz);
        return beta * omega_drive / 2.0;
    };

    // closed-form seed from the linear (approx, through-origin) fit
    double sxy = 0.0, sxx = 0.0;
    for (const auto& pt : points) {
        sxy += pt.omega_z * pt.drive_amplitude;
        sxx += pt.drive_amplitude * pt.drive_amplitude;
    }
    const double slope = sxy / sxx; // omega_z = slope * V0
    const double d2 = trap.characteristic_distance * trap.characteristic_distance;
    double qm = slope * std::sqrt(2.0) * d2 * omega_drive / (2.0 * trap.geometric_efficiency);
    if (!(qm > 0.0)) throw validation_error("fit_charge_to_mass: non-positive Q/m");

    const double qm_cap = 0.908 / qz_of(1.0, v_max, trap);
    if (model == BetaMethod::exact) {
        // guard the scan against the stability boundary before refining
        auto rss = [&](double qm_trial) {
            double s = 0.0;
            for (const auto& pt : points) {
                const double r = pt.omega_z - model_omega(qm_trial, pt.drive_amplitude);
                s += r * r;
            }
            return s;
        };
        if (qm >= qm_cap)
            throw validation_error("fit_charge_to_mass: scan implies q_z > 0.908 at max V0");
        const double hi = std::min(3.0 * qm, 0.999 * qm_cap);
        qm = detail::golden_minimize(rss, qm / 3.0, hi, 1e-13);
        if (qm >= 0.995 * hi && hi == 0.999 * qm_cap)
            throw validation_error(
                "fit_charge_to_mass: fit pinned at the q_z = 0.908 stability boundary");
    }
    if (qz_of(qm, v_max, trap) > 0.908)
        throw validation_error("fit_charge_to_mass: fitted Q/m implies q_z > 0.908 at max V0");

    // standard error via the residuals and the numeric sensitivity d(omega)/d(qm)
    double rss = 0.0, jtj = 0.0;
    for (const auto& pt : points) {
        const double r = pt.omega_z - model_omega(qm, pt.drive_amplitude);
        rss += r * r;
        const double h = 1e-6 * qm;
        const double j =
            (model_omega(qm + h, pt.drive_amplitude) - model_omega(qm - h, pt.drive_amplitude)) /
            (2.0 * h);
        jtj += j * j;
    }
    QmFit fit;
    fit.charge_to_mass = qm;
    const int dof = int(points.size()) - 1;
    fit.standard_error = dof > 0 ? std::sqrt(rss / dof / jtj) : 0.0;
    fit.scan_points = points;
    fit.model = model == BetaMethod::approx ? "approx" : "exact";
    return fit;
}

struct RadiusFitOptions {
    bool free_intercept = false;
};

/// Radius and mass from the linear pressure dependence of the gas damping:
/// gamma = slope * P with slope = 3 c_E / (4 pi rho v_bar R), so
/// R = 3 c_E / (4 pi rho v_bar slope) and m = rho (4/3) pi R^3.
inline RadiusFit fit_radius(const std::vector<PressureScanPoint>& points, double density,
                            const Environment& gas, const RadiusFitOptions& opts = {}) {
    if (points.size() < 2) throw validation_error("fit_radius needs at least 2 scan points");
    if (!(density > 0.0)) throw validation_error("fit_radius: density must be > 0");
    for (const auto& pt : points)
        if (!(pt.pressure > 0.0) || !(pt.gamma > 0.0))
            throw validation_error("fit_radius: pressures and linewidths must be > 0");

    RadiusFit fit;
    fit.scan_points = points;
    fit.assumed_density = density;
    const std::size_t n = points.size();
    double rss = 0.0;
    if (!opts.free_intercept) {
        double sxy = 0.0, sxx = 0.0;
        for (const auto& pt : points) {
            sxy += pt.gamma * pt.pressure;
            sxx += pt.pressure * pt.pressure;
        }
        fit.slope = sxy / sxx;
        for (const auto& pt : points) {
            const double r = pt.gamma - fit.slope * pt.pressure;
            rss += r * r;
        }
        const int dof = int(n) - 1;
        fit.slope_error = dof > 0 ? std::sqrt(rss / dof / sxx) : 0.0;
    } else {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (const auto& pt : points) {
            sx += pt.pressure;
            sy += pt.gamma;
            sxx += pt.pressure * pt.pressure;
            sxy += pt.pressure * pt.gamma;
        }
        const double denom = double(n) * sxx - sx * sx;
        if (std::abs(denom) < 1e-300)
            throw validation_error("fit_radius: degenerate scan, all pressures equal");
        fit.slope = (double(n) * sxy - sx * sy) / denom;
        fit.intercept = (sy - fit.slope * sx) / double(n);
        for (const auto& pt : points) {
            const double r = pt.gamma - fit.slope * pt.pressure - fit.intercept;
            rss += r * r;
        }
        const int dof = int(n) - 2;
        fit.slope_error = dof > 0 ? std::sqrt(rss / dof * double(n) / denom) : 0.0;
    }
    if (!(fit.slope > 0.0)) throw validation_error("fit_radius: non-positive slope");
    fit.standard_error_reliable = n >= 3;

    const double v_bar = gas.mean_gas_speed();
    fit.radius = 3.0 * constants::epstein_coefficient /
                 (4.0 * constants::pi * density * v_bar * fit.slope);
    fit.mass = ParticleSpec::sphere_mass(fit.radius, density);
    return fit;
}

} // namespace levitrap
