#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "levitrap/constants.hpp"

// Core domain types shared by every module. All types are plain immutable
// value types once validated; they carry no behavior beyond construction
// helpers and invariant checks.
namespace levitrap {

/// Thrown when a configuration or argument violates a documented invariant.
/// The message names the violated invariant.
class validation_error : public std::runtime_error {
  public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown on malformed input files (config grammar, scan tables, ...).
class parse_error : public std::runtime_error {
  public:
    explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when an iterative numerical procedure fails to converge.
class numerical_error : public std::runtime_error {
  public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Axis : int { x = 0, y = 1, z = 2 };

inline const char* axis_name(Axis ax) {
    switch (ax) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    default: return "z";
    }
}

inline Axis axis_from_name(const std::string& s) {
    if (s == "x") return Axis::x;
    if (s == "y") return Axis::y;
    if (s == "z") return Axis::z;
    throw validation_error("axis must be one of x, y, z (got '" + s + "')");
}

/// The levitated particle: a homogeneous sphere with a net charge.
struct ParticleSpec {
    double mass = 0.0;                   // kg
    double radius = 0.0;                 // m
    double density = 0.0;                // kg/m³
    double charge = 0.0;                 // C, signed
    double absorption_coefficient = 0.0; // 1/m, optical absorption at the detection wavelength

    /// Sphere mass from radius and density.
    static double sphere_mass(double radius, double density) {
        return density * (4.0 / 3.0) * constants::pi * radius * radius * radius;
    }

    /// Construct a spec with mass derived from (radius, density).
    static ParticleSpec from_radius_density(double radius, double density, double charge,
                                            double absorption_coefficient = 0.0) {
        ParticleSpec p;
        p.radius = radius;
        p.density = density;
        p.mass = sphere_mass(radius, density);
        p.charge = charge;
        p.absorption_coefficient = absorption_coefficient;
        p.validate();
        return p;
    }

    double charge_to_mass() const { return charge / mass; }

    void validate() const {
        if (!(radius > 0.0)) throw validation_error("particle.radius must be > 0");
        if (!(density > 0.0)) throw validation_error("particle.density must be > 0");
        if (!(mass > 0.0)) throw validation_error("particle.mass must be > 0");
        const double implied = sphere_mass(radius, density);
        if (std::abs(mass - implied) / mass > 1e-9)
            throw validation_error("particle mass, radius and density are inconsistent: mass=" +
                                   std::to_string(mass) + " kg but density*(4/3)*pi*r^3=" +
                                   std::to_string(implied) + " kg");
        if (!(absorption_coefficient >= 0.0))
            throw validation_error("particle.absorption_coefficient must be >= 0");
    }

    /// Trapping operations additionally need a nonzero charge.
    void require_charged() const {
        if (charge == 0.0)
            throw validation_error("particle.charge must be nonzero for trapping operations");
    }
};

/// End-cap trap drive and geometry.
struct TrapConfig {
    double drive_amplitude = 0.0;      // V zero-to-peak (config _vpp keys are halved)
    double drive_frequency = 0.0;      // rad/s
    double geometric_efficiency = 0.8; // dimensionless eta
    double dc_geometric_efficiency = 0.8;
    double characteristic_distance = 0.5e-3; // m
    double dc_voltage = 0.0;                 // V, end-cap DC offset (source of a_z)
    double radial_asymmetry = 0.0;           // epsilon, splits the x/y modes
    std::array<double, 3> electrode_coupling{0.0, 0.0, 0.0}; // N/V per axis

    // Defaults-in-effect markers, surfaced in manifests and reports.
    bool geometric_efficiency_defaulted = true;
    bool characteristic_distance_defaulted = true;

    void validate() const {
        if (!(drive_frequency > 0.0)) throw validation_error("trap.drive_frequency must be > 0");
        if (!(characteristic_distance > 0.0))
            throw validation_error("trap.characteristic_distance must be > 0");
        if (!(geometric_efficiency > 0.0 && geometric_efficiency <= 1.0))
            throw validation_error("trap.geometric_efficiency must satisfy 0 < eta <= 1 (got " +
                                   std::to_string(geometric_efficiency) + ")");
        if (!(dc_geometric_efficiency > 0.0 && dc_geometric_efficiency <= 1.0))
            throw validation_error("trap.dc_geometric_efficiency must satisfy 0 < eta_dc <= 1");
        if (!(radial_asymmetry >= 0.0 && radial_asymmetry <= 0.2))
            throw validation_error("trap.radial_asymmetry must lie in [0, 0.2] (got " +
                                   std::to_string(radial_asymmetry) + ")");
        if (!(drive_amplitude >= 0.0)) throw validation_error("trap.drive_amplitude must be >= 0");
    }
};

/// Exponentially decaying stray field left behind by particle loading.
struct StrayDrift {
    std::array<double, 3> initial_field{0.0, 0.0, 0.0}; // V/m per axis
    double decay_time = 0.0;                            // s

    void validate() const {
        if (!(decay_time > 0.0))
            throw validation_error("environment.stray_decay_time must be > 0 when drift is set");
    }
};

/// Slow multiplicative drift of the effective drive amplitude,
/// V0_eff(t) = V0 * (1 + delta * exp(-t/decay_time)).
struct DriveDrift {
    double delta = 0.0;
    double decay_time = 0.0; // s

    void validate() const {
        if (!(decay_time > 0.0))
            throw validation_error("environment.drive_drift_decay_time must be > 0 when drift is set");
    }
};

/// Background gas and residual electrostatics.
struct Environment {
    double pressure = 0.0;                      // Pa
    double gas_temperature = 300.0;             // K
    double gas_molecule_mass = constants::mass_n2; // kg
    std::optional<StrayDrift> stray_drift;
    std::optional<DriveDrift> drive_drift;

    void validate() const {
        if (!(pressure >= 0.0)) throw validation_error("environment.pressure must be >= 0");
        if (!(gas_temperature > 0.0)) throw validation_error("environment.gas_temperature must be > 0");
        if (!(gas_molecule_mass > 0.0))
            throw validation_error("environment.gas_molecule_mass must be > 0");
        if (stray_drift) stray_drift->validate();
        if (drive_drift) drive_drift->validate();
    }

    /// Mean gas molecule speed, sqrt(8 kT / (pi m_a)).
    double mean_gas_speed() const {
        return std::sqrt(8.0 * constants::k_boltzmann * gas_temperature /
                         (constants::pi * gas_molecule_mass));
    }
};

} // namespace levitrap
