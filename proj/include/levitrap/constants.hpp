#pragma once

#include <numbers>

// Fundamental physical constants (CODATA 2018, SI). Single source of truth
// for the whole library; everything downstream works in SI internally.
namespace levitrap::constants {

inline constexpr double pi = std::numbers::pi_v<double>;

/// k_B — Boltzmann constant [J/K] (exact by SI definition).
inline constexpr double k_boltzmann = 1.380649e-23;

/// ħ — reduced Planck constant [J·s] (h = 6.62607015e-34 exact).
inline constexpr double hbar = 6.62607015e-34 / (2.0 * pi);

/// G — Newtonian constant of gravitation [m³/(kg·s²)].
inline constexpr double gravitation = 6.67430e-11;

/// c — speed of light in vacuum [m/s] (exact).
inline constexpr double speed_of_light = 299792458.0;

// Default material / gas parameters used across the toolkit.

/// Apparent nanodiamond density [kg/m³]; makes a 91 nm radius particle
/// weigh 9.6e-18 kg. Commercial ND slurries come in below bulk diamond.
inline constexpr double density_nanodiamond = 3040.0;

/// Bulk diamond density [kg/m³], available as a named preset.
inline constexpr double density_bulk_diamond = 3500.0;

/// N2 molecule mass [kg], the default background gas.
inline constexpr double mass_n2 = 4.65e-26;

/// Epstein drag prefactor for diffuse reflection (dimensionless).
inline constexpr double epstein_coefficient = 15.8;

} // namespace levitrap::constants
