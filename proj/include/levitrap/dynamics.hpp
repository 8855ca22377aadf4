#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "levitrap/config.hpp"
#include "levitrap/constants.hpp"
#include "levitrap/core.hpp"
#include "levitrap/rng.hpp"
#include "levitrap/trap.hpp"

// Time-domain stochastic simulation of the trapped particle. Equation of
// motion per axis:
//   u'' + gamma u' + (Omega^2/4)(a_i + 2 q_i cos Omega t) u = F_ext,i(t)/m
// with F_ext collecting the thermal force, electrode drives (tickler or
// feedback, kappa_i * V(t)) and the stray field Q*E(t).
//
// Integrator: Strang split per step dt = 1/sample_rate. The damping/noise
// part advances with the exact Ornstein-Uhlenbeck update over dt/2 on each
// side of a velocity-Verlet step for the trap force; external forces are
// held constant across the step (zero-order hold, as a sampled controller
// output would be). The time-symmetric core keeps the energy ledger free of
// systematic drift. A run is bit-reproducible from (configs, seed).
namespace levitrap {

struct DriveSpec {
    enum class Kind { none, tickler };
    Kind kind = Kind::none;
    double frequency = 0.0; // rad/s (tickler)
    double amplitude = 0.0; // V
    Axis axis = Axis::z;

    void validate() const {
        if (!(amplitude >= 0.0)) throw validation_error("drive.amplitude must be >= 0");
        if (kind == Kind::tickler && !(frequency > 0.0))
            throw validation_error("tickler drive.frequency must be > 0");
    }
};

/// Per-run energy ledger. Channels are accumulated from the forces as they
/// act; closure() compares their sum against the actual change in mechanical
/// energy (kinetic + instantaneous trap potential).
struct EnergyAudit {
    double bath_heat = 0.0;     // J, damping + thermal kicks (OU substeps)
    double feedback_work = 0.0; // J, hook (controller) force
    double drive_work = 0.0;    // J, tickler electrode force
    double stray_work = 0.0;    // J, stray-field force
    double rf_work = 0.0;       // J, explicit time dependence of the trap potential
    double gross_turnover = 0.0; // J, sum of |per-step increments| of the external channels
    double initial_energy = 0.0;
    double final_energy = 0.0;

    double channel_sum() const {
        return bath_heat + feedback_work + drive_work + stray_work + rf_work;
    }
    /// Relative ledger residual (0 = perfect bookkeeping). Normalized by the
    /// gross energy exchanged so that steady states (net flows near zero)
    /// remain well conditioned.
    double closure() const {
        const double denom = gross_turnover + std::abs(final_energy - initial_energy);
        if (denom == 0.0) return 0.0;
        return std::abs(final_energy - initial_energy - channel_sum()) / denom;
    }
};

struct SimTrajectory {
    double sample_rate = 0.0; // Hz
    std::array<std::vector<double>, 3> positions;  // m
    std::array<std::vector<double>, 3> velocities; // m/s (empty if not recorded)
    std::uint64_t rng_seed = 0;
    bool escaped = false;
    double escape_time = -1.0; // s, valid when escaped
    SystemConfig config_snapshot;
    EnergyAudit audit;

    std::size_t size() const { return positions[0].size(); }
    double time(std::size_t i) const { return double(i) / sample_rate; }
    std::vector<double> times() const {
        std::vector<double> t(size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = time(i);
        return t;
    }
    double duration() const { return size() ? time(size() - 1) : 0.0; }
};

struct SimOptions {
    bool thermal_noise = true;      // stochastic bath force on/off (damping stays)
    bool record_velocities = true;
    bool thermal_initial_state = true; // draw x,v from the secular Gibbs state
    std::array<double, 3> initial_position{0.0, 0.0, 0.0}; // used when not thermal
    std::array<double, 3> initial_velocity{0.0, 0.0, 0.0};
    std::uint64_t max_samples = 64000000;
};

/// Epstein (free molecular flow) drag rate gamma_gas [1/s]:
///   gamma = c_E * P * R^2 / (m * v_bar),  v_bar = sqrt(8 kT / (pi m_a)).
/// Strictly linear in pressure; the slope carries the particle radius.
inline double epstein_damping(const ParticleSpec& particle, const Environment& env) {
    if (!(env.pressure >= 0.0)) throw validation_error("environment.pressure must be >= 0");
    if (env.pressure == 0.0) return 0.0;
    return constants::epstein_coefficient * env.pressure * particle.radius * particle.radius /
           (particle.mass * env.mean_gas_speed());
}

/// White-noise intensity D = 2 m gamma k_B T [N^2 s] closing the
/// fluctuation-dissipation relation: <F(t)F(t')> = D delta(t-t') per axis.
inline double thermal_force_strength(double gamma, double mass, double temperature) {
    if (!(gamma >= 0.0)) throw validation_error("gamma must be >= 0");
    if (!(temperature > 0.0)) throw validation_error("temperature must be > 0");
    return 2.0 * mass * gamma * constants::k_boltzmann * temperature;
}

/// Stray field at time t [V/m per axis]; requires env.stray_drift configured.
inline std::array<double, 3> apply_stray_drift(const Environment& env, double t) {
    if (!env.stray_drift)
        throw validation_error("environment.stray_drift is not configured");
    const auto& s = *env.stray_drift;
    const double decay = std::exp(-t / s.decay_time);
    return {s.initial_field[0] * decay, s.initial_field[1] * decay, s.initial_field[2] * decay};
}

/// Multiplicative drive-amplitude drift factor V0_eff(t)/V0.
inline double drive_amplitude_scale(const Environment& env, double t) {
    if (!env.drive_drift) return 1.0;
    return 1.0 + env.drive_drift->delta * std::exp(-t / env.drive_drift->decay_time);
}

namespace detail {

struct NullHook {
    std::array<double, 3> force(std::size_t, double, const std::array<double, 3>&,
                                const std::array<double, 3>&) {
        return {0.0, 0.0, 0.0};
    }
};

} // namespace detail

/// Core integrator. `hook.force(step, t, x, v)` is queried once per step with
/// the state at the step start and its return is applied as a constant force
/// across the step (a feedback controller samples and acts at this cadence).
template <class Hook>
SimTrajectory simulate_hooked(const ParticleSpec& particle, const TrapConfig& trap,
                              const Environment& env, const DriveSpec& drive, double duration,
                              double sample_rate, std::uint64_t seed, const SimOptions& opts,
                              Hook&& hook) {
    particle.validate();
    trap.validate();
    env.validate();
    drive.validate();
    const double f_drive_hz = trap.drive_frequency / (2.0 * constants::pi);
    if (!(sample_rate >= 50.0 * f_drive_hz))
        throw validation_error("sample_rate must be >= 50 * drive frequency (" +
                               std::to_string(50.0 * f_drive_hz) + " Hz) to resolve micromotion");
    if (!(duration > 0.0)) throw validation_error("duration must be > 0");
    const std::size_t n_samples = std::size_t(std::llround(duration * sample_rate));
    if (n_samples == 0) throw validation_error("duration too short for one sample");
    if (n_samples > opts.max_samples)
        throw validation_error("duration * sample_rate exceeds the implementation cap of " +
                               std::to_string(opts.max_samples) + " samples");

    const double dt = 1.0 / sample_rate;
    const double m = particle.mass;
    const double omega_rf = trap.drive_frequency;
    const auto mp = mathieu_parameters(particle, trap);
    const double gamma = epstein_damping(particle, env);
    const double kT = constants::k_boltzmann * env.gas_temperature;

    // Trap force F_i = -(k0_i + k1_i * s(t) * cos(Omega t)) * x_i
    std::array<double, 3> k0{}, k1{};
    for (int i = 0; i < 3; ++i) {
        k0[i] = m * omega_rf * omega_rf * mp.a[i] / 4.0;
        k1[i] = m * omega_rf * omega_rf * mp.q[i] / 2.0;
    }
    auto potential = [&](const std::array<double, 3>& x, double t) {
        const double s = drive_amplitude_scale(env, t);
        const double c = std::cos(omega_rf * t);
        double u = 0.0;
        for (int i = 0; i < 3; ++i) u += 0.5 * (k0[i] + k1[i] * s * c) * x[i] * x[i];
        return u;
    };

    // Exact OU update over dt/2.
    const double ou_decay = std::exp(-gamma * dt / 2.0);
    const double sigma_v = std::sqrt(kT / m);
    const double ou_kick =
        opts.thermal_noise ? sigma_v * std::sqrt(1.0 - ou_decay * ou_decay) : 0.0;
    const bool has_bath = gamma > 0.0;

    Rng rng(seed);

    // Initial state: secular-potential Gibbs draw at the gas temperature.
    std::array<double, 3> x = opts.initial_position;
    std::array<double, 3> v = opts.initial_velocity;
    if (opts.thermal_initial_state) {
        std::array<double, 3> omega_sec{0.0, 0.0, 0.0};
        if (is_stable(mp)) {
            for (int i = 0; i < 3; ++i) {
                if (mp.q[i] != 0.0 || mp.a[i] > 0.0)
                    omega_sec[i] = beta_exact(mp.a[i], mp.q[i]) * omega_rf / 2.0;
            }
        }
        for (int i = 0; i < 3; ++i) {
            x[i] = omega_sec[i] > 0.0
                       ? std::sqrt(kT / (m * omega_sec[i] * omega_sec[i])) * rng.gaussian()
                       : 0.0;
            v[i] = sigma_v * rng.gaussian();
        }
    }

    SimTrajectory traj;
    traj.sample_rate = sample_rate;
    traj.rng_seed = seed;
    traj.config_snapshot.particle = particle;
    traj.config_snapshot.trap = trap;
    traj.config_snapshot.environment = env;
    traj.config_snapshot.simulation = {duration, sample_rate, seed};
    for (int i = 0; i < 3; ++i) {
        traj.positions[i].reserve(n_samples);
        if (opts.record_velocities) traj.velocities[i].reserve(n_samples);
    }

    EnergyAudit& audit = traj.audit;
    auto kinetic = [&](const std::array<double, 3>& vel) {
        return 0.5 * m * (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]);
    };
    audit.initial_energy = kinetic(v) + potential(x, 0.0);

    const double escape_radius = 100.0 * trap.characteristic_distance;
    const int tick_axis = int(drive.axis);
    const double tick_kappa = trap.electrode_coupling[tick_axis];
    const bool has_stray = env.stray_drift.has_value();

    // trap stiffness at time t, cached across steps (end of step n = start of n+1)
    auto stiffness = [&](double t) {
        const double s = drive_amplitude_scale(env, t);
        const double c = std::cos(omega_rf * t);
        return std::array<double, 3>{k0[0] + k1[0] * s * c, k0[1] + k1[1] * s * c,
                                     k0[2] + k1[2] * s * c};
    };
    std::array<double, 3> k_now = stiffness(0.0);

    for (std::size_t n = 0; n < n_samples; ++n) {
        const double t = double(n) * dt;

        for (int i = 0; i < 3; ++i) {
            traj.positions[i].push_back(x[i]);
            if (opts.record_velocities) traj.velocities[i].push_back(v[i]);
        }
        if (std::abs(x[0]) > escape_radius || std::abs(x[1]) > escape_radius ||
            std::abs(x[2]) > escape_radius) {
            traj.escaped = true;
            traj.escape_time = t;
            break;
        }

        const std::array<double, 3> hook_force = hook.force(n, t, x, v);

        // OU half step
        if (has_bath) {
            for (int i = 0; i < 3; ++i) {
                const double v_new = ou_decay * v[i] + ou_kick * rng.gaussian();
                const double dq = 0.5 * m * (v_new * v_new - v[i] * v[i]);
                audit.bath_heat += dq;
                audit.gross_turnover += std::abs(dq);
                v[i] = v_new;
            }
        }

        // External forces, held constant across the step.
        const double t_mid = t + 0.5 * dt;
        std::array<double, 3> ext = hook_force;
        double tickler_force = 0.0;
        if (drive.kind == DriveSpec::Kind::tickler) {
            tickler_force = tick_kappa * drive.amplitude * std::sin(drive.frequency * t_mid);
            ext[tick_axis] += tickler_force;
        }
        std::array<double, 3> stray_force{};
        if (has_stray) {
            const auto field = apply_stray_drift(env, t_mid);
            for (int i = 0; i < 3; ++i) {
                stray_force[i] = particle.charge * field[i];
                ext[i] += stray_force[i];
            }
        }

        // Velocity Verlet: half kick, drift, half kick.
        const std::array<double, 3> x_before = x;
        for (int i = 0; i < 3; ++i) {
            v[i] += 0.5 * dt * (-k_now[i] * x[i] + ext[i]) / m;
            x[i] += dt * v[i];
        }
        const auto k_next = stiffness(t + dt);
        std::array<double, 3> drift_velocity{};
        for (int i = 0; i < 3; ++i) {
            drift_velocity[i] = v[i];
            v[i] += 0.5 * dt * (-k_next[i] * x[i] + ext[i]) / m;
        }
        k_now = k_next;

        // External work: the only displacement happens in the drift, so a
        // held force does exactly F * dt * v_drift of work per step.
        for (int i = 0; i < 3; ++i) {
            const double dx = dt * drift_velocity[i];
            const double dw_fb = hook_force[i] * dx;
            audit.feedback_work += dw_fb;
            audit.gross_turnover += std::abs(dw_fb);
            if (has_stray) {
                const double dw_s = stray_force[i] * dx;
                audit.stray_work += dw_s;
                audit.gross_turnover += std::abs(dw_s);
            }
            if (i == tick_axis && tickler_force != 0.0) {
                const double dw_d = tickler_force * dx;
                audit.drive_work += dw_d;
                audit.gross_turnover += std::abs(dw_d);
            }
        }

        // OU half step
        if (has_bath) {
            for (int i = 0; i < 3; ++i) {
                const double v_new = ou_decay * v[i] + ou_kick * rng.gaussian();
                const double dq = 0.5 * m * (v_new * v_new - v[i] * v[i]);
                audit.bath_heat += dq;
                audit.gross_turnover += std::abs(dq);
                v[i] = v_new;
            }
        }

        // Work done by the potential's explicit time dependence over the
        // step: time-symmetric trapezoid over the two endpoint positions.
        // Not part of the gross turnover: it swings at the RF period and
        // would swamp the normalizer.
        audit.rf_work += 0.5 * ((potential(x_before, t + dt) - potential(x_before, t)) +
                                (potential(x, t + dt) - potential(x, t)));
    }

    const std::size_t n_rec = traj.size();
    const double t_end = n_rec < n_samples ? traj.escape_time : double(n_samples) * dt;
    // final_energy uses the last recorded state
    std::array<double, 3> x_last{}, v_last{};
    if (n_rec > 0) {
        for (int i = 0; i < 3; ++i) {
            x_last[i] = traj.positions[i].back();
            v_last[i] = opts.record_velocities ? traj.velocities[i].back() : v[i];
        }
    }
    if (!traj.escaped) {
        audit.final_energy = kinetic(v) + potential(x, t_end);
    } else {
        audit.final_energy = kinetic(v_last) + potential(x_last, t_end);
    }

    for (auto& p : traj.positions) p.shrink_to_fit();
    for (auto& vv : traj.velocities) vv.shrink_to_fit();
    return traj;
}

inline SimTrajectory simulate(const ParticleSpec& particle, const TrapConfig& trap,
                              const Environment& env, const DriveSpec& drive, double duration,
                              double sample_rate, std::uint64_t seed,
                              const SimOptions& opts = {}) {
    detail::NullHook hook;
    return simulate_hooked(particle, trap, env, drive, duration, sample_rate, seed, opts, hook);
}

/// Resonant (or detuned) electrode drive on one axis on top of the thermal
/// motion. On resonance the steady-state response amplitude is
/// kappa V / (m gamma omega).
inline SimTrajectory run_tickler(const ParticleSpec& particle, const TrapConfig& trap,
                                 const Environment& env, Axis axis, double drive_voltage,
                                 double drive_frequency, double duration, double sample_rate,
                                 std::uint64_t seed, const SimOptions& opts = {}) {
    DriveSpec d;
    d.kind = DriveSpec::Kind::tickler;
    d.axis = axis;
    d.amplitude = drive_voltage;
    d.frequency = drive_frequency;
    return simulate(particle, trap, env, d, duration, sample_rate, seed, opts);
}

} // namespace levitrap
