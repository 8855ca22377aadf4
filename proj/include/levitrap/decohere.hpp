#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "levitrap/constants.hpp"
#include "levitrap/core.hpp"
#include "levitrap/optim.hpp"

// Decoherence and thermal budgets: background-gas scattering rate and its
// pressure inverse, gravitationally induced state-reduction lifetime for a
// two-position superposition of a uniform sphere, and the laser-absorption
// vs blackbody-emission internal temperature balance.
namespace levitrap {

struct GasDecoherenceQuery {
    double pressure = 0.0;          // Pa
    double radius = 0.0;            // m
    double gas_molecule_mass = constants::mass_n2;
    double environment_temperature = 300.0; // K

    void validate() const {
        if (!(pressure > 0.0) || !(radius > 0.0) || !(gas_molecule_mass > 0.0) ||
            !(environment_temperature > 0.0))
            throw validation_error("gas decoherence query requires all-positive parameters");
    }
};

/// gamma_a = (16 pi sqrt(2 pi)/sqrt(3)) * P R^2 / sqrt(3 m_a k_B T_e)
inline double gas_decoherence_rate(const GasDecoherenceQuery& q) {
    if (q.pressure == 0.0) return 0.0;
    GasDecoherenceQuery check = q;
    check.pressure = std::max(q.pressure, std::numeric_limits<double>::min());
    check.validate();
    const double prefactor =
        16.0 * constants::pi * std::sqrt(2.0 * constants::pi) / std::sqrt(3.0);
    return prefactor * q.pressure * q.radius * q.radius /
           std::sqrt(3.0 * q.gas_molecule_mass * constants::k_boltzmann *
                     q.environment_temperature);
}

/// Pressure at which gamma_a * t equals the decoherence budget (default 1).
inline double min_pressure(double interferometer_time, double radius,
                           double gas_molecule_mass = constants::mass_n2,
                           double environment_temperature = 300.0, double budget = 1.0) {
    if (!(interferometer_time > 0.0) || !(radius > 0.0) || !(budget > 0.0))
        throw validation_error("min_pressure requires positive time, radius and budget");
    GasDecoherenceQuery unit;
    unit.pressure = 1.0;
    unit.radius = radius;
    unit.gas_molecule_mass = gas_molecule_mass;
    unit.environment_temperature = environment_temperature;
    return budget / (gas_decoherence_rate(unit) * interferometer_time);
}

struct DpQuery {
    double mass = 0.0;       // kg
    double radius = 0.0;     // m
    double separation = 0.0; // m

    void validate() const {
        if (!(mass > 0.0) || !(radius > 0.0) || !(separation >= 0.0))
            throw validation_error("DP query requires positive mass and radius");
    }

    static DpQuery from_density(double mass, double density, double separation) {
        DpQuery q;
        q.mass = mass;
        q.radius = std::cbrt(3.0 * mass / (4.0 * constants::pi * density));
        q.separation = separation;
        q.validate();
        return q;
    }
};

/// Overlap factor of the self-energy integral for two displaced uniform
/// spheres, lambda = d/(2R):
///   f(lambda) = 2 l^2 - 1.5 l^3 + 0.2 l^5   for 0 <= lambda <= 1
///   f(lambda) = 1.2 - 0.5 / lambda          for lambda >= 1
/// Continuous at lambda = 1 (f = 0.7), approaching 1.2 at large separation.
inline double dp_overlap_factor(double lambda) {
    if (lambda < 0.0) throw validation_error("dp_overlap_factor: lambda must be >= 0");
    if (lambda <= 1.0)
        return 2.0 * lambda * lambda - 1.5 * lambda * lambda * lambda +
               0.2 * lambda * lambda * lambda * lambda * lambda;
    return 1.2 - 0.5 / lambda;
}

/// E_G = (G M^2 / R) f(d / 2R)
inline double dp_self_energy(const DpQuery& q) {
    q.validate();
    return constants::gravitation * q.mass * q.mass / q.radius *
           dp_overlap_factor(q.separation / (2.0 * q.radius));
}

/// Superposition lifetime hbar / E_G; infinity at zero separation.
inline double dp_lifetime(const DpQuery& q) {
    const double e_g = dp_self_energy(q);
    if (e_g == 0.0) return std::numeric_limits<double>::infinity();
    return constants::hbar / e_g;
}

/// T^6 radiative-emission law calibrated against a single anchor point.
struct HeatBalanceModel {
    double absorption_coefficient = 3.0; // 1/m (0.03 /cm standard grade)
    double radiative_constant = 0.0;     // W/(m^3 K^6)
    double environment_temperature = 300.0;

    void validate() const {
        if (!(absorption_coefficient >= 0.0))
            throw validation_error("heat balance: absorption_coefficient must be >= 0");
        if (!(radiative_constant > 0.0))
            throw validation_error("heat balance: radiative_constant must be > 0");
        if (!(environment_temperature > 0.0))
            throw validation_error("heat balance: environment_temperature must be > 0");
    }
};

/// All heat-balance outputs rest on the anchored T^6 emission model.
inline constexpr const char* heat_balance_provenance = "calibrated-model";

struct HeatBalanceAnchor {
    double intensity = 1.65e8;           // W/m^2 (165 W/mm^2)
    double absorption_coefficient = 3.0; // 1/m
    double balance_temperature = 500.0;  // K
    double environment_temperature = 300.0;
};

/// kappa_rad = alpha I / (T_balance^6 - T_env^6)
inline double calibrate_radiative_constant(const HeatBalanceAnchor& anchor) {
    if (!(anchor.balance_temperature > anchor.environment_temperature))
        throw validation_error(
            "calibrate_radiative_constant: balance temperature must exceed environment");
    const double t6 = std::pow(anchor.balance_temperature, 6) -
                      std::pow(anchor.environment_temperature, 6);
    return anchor.absorption_coefficient * anchor.intensity / t6;
}

/// Steady internal temperature solving alpha I = kappa_rad (T^6 - T_env^6)
/// (particle volume cancels). Bracketed bisection, 1e-9 relative.
inline double internal_temperature_balance(double intensity, const ParticleSpec& particle,
                                           const HeatBalanceModel& model) {
    model.validate();
    if (!(intensity >= 0.0)) throw validation_error("heat balance: intensity must be >= 0");
    const double alpha =
        particle.absorption_coefficient > 0.0 ? particle.absorption_coefficient
                                              : model.absorption_coefficient;
    const double t_env = model.environment_temperature;
    if (intensity == 0.0 || alpha == 0.0) return t_env;
    const double load = alpha * intensity / model.radiative_constant; // T^6 - T_env^6
    auto residual = [&](double t) {
        return load - (std::pow(t, 6) - std::pow(t_env, 6));
    };
    double hi = t_env * 2.0;
    while (residual(hi) > 0.0) hi *= 2.0;
    return detail::bisect_root(residual, t_env, hi, 1e-9);
}

} // namespace levitrap
