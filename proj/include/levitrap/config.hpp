#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "levitrap/core.hpp"

// Configuration: a flat `section.key = value` text format, parsed into the
// typed config structs used everywhere else. Values are numbers; unit-suffixed
// key aliases (_mbar, _vpp, _khz, _deg) convert on read. Internally everything
// is SI (Pa, V zero-to-peak, Hz for spectral quantities, rad/s for the trap
// drive, degrees for demodulation phases).
namespace levitrap {

/// Detector chain: linear position-to-volts conversion per axis, optional
/// channel mixing, optional quadratic term, and a white noise floor.
struct DetectionConfig {
    std::array<double, 3> conversion{1.0, 1.0, 1.0}; // V/m per axis
    double noise_floor = 0.0;                        // V²/Hz, one-sided
    std::array<std::array<double, 3>, 3> crosstalk{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    double quadratic_coefficient = 0.0; // 1/V; V += b2*(conversion*u)^2 when nonzero

    void validate() const {
        if (!(noise_floor >= 0.0)) throw validation_error("detection.noise_floor must be >= 0");
        for (double c : conversion)
            if (!(c >= 0.0) || !std::isfinite(c))
                throw validation_error("detection.conversion must be finite and >= 0");
    }
};

/// IQ demodulation controller settings. Defaults mirror a typical FPGA
/// lock-in configuration for a ~6 kHz mode: frequency 6.168 kHz, bandwidth
/// 200 Hz, gain 12, phase 270 deg, AC coupling 150 Hz.
struct IqFeedbackConfig {
    double center_frequency = 6.168e3;    // Hz
    double filter_bandwidth = 200.0;      // Hz (full bandpass width)
    double gain = 12.0;                   // dimensionless output gain
    double demodulation_phase = 270.0;    // degrees in [0, 360)
    double ac_coupling_bandwidth = 150.0; // Hz; 0 disables the high-pass
    Axis target_axis = Axis::y;
    double saturation = 1.0; // V, output clamp (FPGA DAC range)
    int delay_samples = 1;   // loop latency in samples

    void validate() const {
        if (!(center_frequency > 0.0)) throw validation_error("feedback.frequency must be > 0");
        if (!(filter_bandwidth > 0.0)) throw validation_error("feedback.bandwidth must be > 0");
        if (!(ac_coupling_bandwidth >= 0.0))
            throw validation_error("feedback.acbandwidth must be >= 0");
        if (!(demodulation_phase >= 0.0 && demodulation_phase < 360.0))
            throw validation_error("feedback.phase must lie in [0, 360) degrees");
        if (!(saturation > 0.0)) throw validation_error("feedback.saturation must be > 0");
        if (delay_samples < 0) throw validation_error("feedback.delay_samples must be >= 0");
    }
};

/// Batch-run defaults carried in config files; usually overridden per command.
struct SimulationParams {
    double duration = 0.1;       // s
    double sample_rate = 0.0;    // Hz; 0 means pick 50 * drive frequency
    std::uint64_t seed = 1;
};

struct SystemConfig {
    ParticleSpec particle;
    TrapConfig trap;
    Environment environment;
    DetectionConfig detection;
    IqFeedbackConfig feedback;
    SimulationParams simulation;

    void validate() const {
        particle.validate();
        trap.validate();
        environment.validate();
        detection.validate();
        feedback.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    if (t.empty()) throw parse_error("empty value for key '" + key + "'");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size())
        throw parse_error("value '" + t + "' for key '" + key + "' is not a number");
    return v;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Raw parse: key/value lines with '#' comments. Returns keys in file order.
/// Grammar: `section.key = number[unit-suffix]`; `.axis` keys take x|y|z.
inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw parse_error("line " + std::to_string(lineno) + ": expected 'section.key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.find('.') == std::string::npos)
            throw parse_error("line " + std::to_string(lineno) + ": key '" + key +
                              "' is missing its section prefix");
        if (kv.count(key))
            throw parse_error("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

/// Build a validated SystemConfig from raw key/value pairs.
inline SystemConfig config_from_key_values(const std::map<std::string, std::string>& kv_in) {
    SystemConfig cfg;
    std::map<std::string, std::string> kv = kv_in;

    auto take = [&kv](const std::string& key, double scale, double& out, bool* present = nullptr) {
        auto it = kv.find(key);
        if (it == kv.end()) return false;
        out = scale * detail::parse_number(it->second, key);
        kv.erase(it);
        if (present) *present = true;
        return true;
    };

    // particle
    double radius = 0, density = constants::density_nanodiamond, mass = 0;
    bool has_radius = false, has_mass = false;
    take("particle.radius", 1.0, radius, &has_radius);
    take("particle.density", 1.0, density);
    take("particle.mass", 1.0, mass, &has_mass);
    if (!has_radius) throw validation_error("particle.radius is required");
    cfg.particle.radius = radius;
    cfg.particle.density = density;
    cfg.particle.mass = has_mass ? mass : ParticleSpec::sphere_mass(radius, density);

    double charge = 0, qm = 0;
    const bool has_charge = take("particle.charge", 1.0, charge);
    const bool has_qm = take("particle.charge_to_mass", 1.0, qm);
    if (has_charge && has_qm)
        throw parse_error("give either particle.charge or particle.charge_to_mass, not both");
    cfg.particle.charge = has_charge ? charge : qm * cfg.particle.mass;
    take("particle.absorption_coefficient", 1.0, cfg.particle.absorption_coefficient);

    // trap
    double v0 = 0, vpp = 0, f_hz = 0, f_khz = 0;
    const bool has_v0 = take("trap.drive_amplitude", 1.0, v0);
    const bool has_vpp = take("trap.drive_amplitude_vpp", 1.0, vpp);
    if (has_v0 && has_vpp)
        throw parse_error("give either trap.drive_amplitude or trap.drive_amplitude_vpp, not both");
    cfg.trap.drive_amplitude = has_vpp ? 0.5 * vpp : v0;
    double f_rad = 0;
    const bool has_f = take("trap.drive_frequency", 1.0, f_hz);
    const bool has_fk = take("trap.drive_frequency_khz", 1.0, f_khz);
    const bool has_fr = take("trap.drive_frequency_rad", 1.0, f_rad);
    if (int(has_f) + int(has_fk) + int(has_fr) > 1)
        throw parse_error("give only one of trap.drive_frequency[_khz|_rad]");
    cfg.trap.drive_frequency =
        has_fr ? f_rad : 2.0 * constants::pi * (has_fk ? 1e3 * f_khz : f_hz);

    bool eta_set = false, d_set = false;
    take("trap.geometric_efficiency", 1.0, cfg.trap.geometric_efficiency, &eta_set);
    cfg.trap.geometric_efficiency_defaulted = !eta_set;
    if (!take("trap.dc_geometric_efficiency", 1.0, cfg.trap.dc_geometric_efficiency))
        cfg.trap.dc_geometric_efficiency = cfg.trap.geometric_efficiency;
    take("trap.characteristic_distance", 1.0, cfg.trap.characteristic_distance, &d_set);
    cfg.trap.characteristic_distance_defaulted = !d_set;
    take("trap.dc_voltage", 1.0, cfg.trap.dc_voltage);
    take("trap.radial_asymmetry", 1.0, cfg.trap.radial_asymmetry);
    double coupling = 0;
    if (take("trap.electrode_coupling", 1.0, coupling))
        cfg.trap.electrode_coupling = {coupling, coupling, coupling};
    take("trap.electrode_coupling_x", 1.0, cfg.trap.electrode_coupling[0]);
    take("trap.electrode_coupling_y", 1.0, cfg.trap.electrode_coupling[1]);
    take("trap.electrode_coupling_z", 1.0, cfg.trap.electrode_coupling[2]);

    // environment
    double p_pa = 0, p_mbar = 0;
    const bool has_pa = take("environment.pressure", 1.0, p_pa);
    const bool has_mbar = take("environment.pressure_mbar", 1.0, p_mbar);
    if (has_pa && has_mbar)
        throw parse_error("give either environment.pressure or environment.pressure_mbar, not both");
    cfg.environment.pressure = has_mbar ? 100.0 * p_mbar : p_pa; // 1 mbar = 100 Pa
    take("environment.gas_temperature", 1.0, cfg.environment.gas_temperature);
    take("environment.gas_molecule_mass", 1.0, cfg.environment.gas_molecule_mass);

    StrayDrift stray;
    bool any_stray = false;
    any_stray |= take("environment.stray_field_x", 1.0, stray.initial_field[0]);
    any_stray |= take("environment.stray_field_y", 1.0, stray.initial_field[1]);
    any_stray |= take("environment.stray_field_z", 1.0, stray.initial_field[2]);
    const bool has_stray_tau = take("environment.stray_decay_time", 1.0, stray.decay_time);
    if (any_stray || has_stray_tau) {
        if (!has_stray_tau)
            throw validation_error("environment.stray_decay_time is required with stray fields");
        cfg.environment.stray_drift = stray;
    }
    DriveDrift dd;
    const bool has_dd = take("environment.drive_drift_delta", 1.0, dd.delta);
    const bool has_dd_tau = take("environment.drive_drift_decay_time", 1.0, dd.decay_time);
    if (has_dd || has_dd_tau) {
        if (!(has_dd && has_dd_tau))
            throw validation_error(
                "environment.drive_drift_delta and drive_drift_decay_time must be given together");
        cfg.environment.drive_drift = dd;
    }

    // detection
    double conv = 0;
    if (take("detection.conversion", 1.0, conv)) cfg.detection.conversion = {conv, conv, conv};
    take("detection.conversion_x", 1.0, cfg.detection.conversion[0]);
    take("detection.conversion_y", 1.0, cfg.detection.conversion[1]);
    take("detection.conversion_z", 1.0, cfg.detection.conversion[2]);
    take("detection.noise_floor", 1.0, cfg.detection.noise_floor);
    take("detection.quadratic_coefficient", 1.0, cfg.detection.quadratic_coefficient);
    static const char* axes = "xyz";
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            std::string key = std::string("detection.crosstalk_") + axes[i] + axes[j];
            take(key, 1.0, cfg.detection.crosstalk[i][j]);
        }

    // feedback: keys named exactly after the FPGA IQ-module parameters
    double fb_khz = 0;
    const bool has_fb_hz = take("feedback.frequency", 1.0, cfg.feedback.center_frequency);
    if (take("feedback.frequency_khz", 1.0, fb_khz)) {
        if (has_fb_hz)
            throw parse_error("give either feedback.frequency or feedback.frequency_khz, not both");
        cfg.feedback.center_frequency = 1e3 * fb_khz;
    }
    take("feedback.bandwidth", 1.0, cfg.feedback.filter_bandwidth);
    take("feedback.gain", 1.0, cfg.feedback.gain);
    double phase_deg = 0;
    const bool has_phase = take("feedback.phase", 1.0, phase_deg);
    const bool has_phase_deg = take("feedback.phase_deg", 1.0, phase_deg);
    if (has_phase && has_phase_deg)
        throw parse_error("give either feedback.phase or feedback.phase_deg, not both");
    if (has_phase || has_phase_deg) cfg.feedback.demodulation_phase = phase_deg;
    take("feedback.acbandwidth", 1.0, cfg.feedback.ac_coupling_bandwidth);
    take("feedback.saturation", 1.0, cfg.feedback.saturation);
    double delay = 1;
    if (take("feedback.delay_samples", 1.0, delay)) cfg.feedback.delay_samples = int(delay);
    if (auto it = kv.find("feedback.axis"); it != kv.end()) {
        cfg.feedback.target_axis = axis_from_name(detail::trim(it->second));
        kv.erase(it);
    }

    // simulation defaults
    take("simulation.duration", 1.0, cfg.simulation.duration);
    take("simulation.sample_rate", 1.0, cfg.simulation.sample_rate);
    if (auto it = kv.find("simulation.seed"); it != kv.end()) {
        const std::string t = detail::trim(it->second);
        char* end = nullptr;
        cfg.simulation.seed = std::strtoull(t.c_str(), &end, 10);
        if (end != t.c_str() + t.size())
            throw parse_error("simulation.seed must be an unsigned integer (got '" + t + "')");
        kv.erase(it);
    }

    if (!kv.empty()) throw parse_error("unknown configuration key '" + kv.begin()->first + "'");

    cfg.validate();
    return cfg;
}

inline SystemConfig parse_config(const std::string& text) {
    std::istringstream in(text);
    return config_from_key_values(parse_key_values(in));
}

inline SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open config file '" + path + "'");
    return config_from_key_values(parse_key_values(in));
}

/// Canonical serialization: SI units, no suffixes, %.17g (round-trips bitwise).
inline std::string serialize_config(const SystemConfig& cfg) {
    using detail::format_double;
    std::ostringstream out;
    auto emit = [&out](const std::string& key, double v) {
        out << key << " = " << format_double(v) << "\n";
    };
    emit("particle.radius", cfg.particle.radius);
    emit("particle.density", cfg.particle.density);
    emit("particle.mass", cfg.particle.mass);
    emit("particle.charge", cfg.particle.charge);
    emit("particle.absorption_coefficient", cfg.particle.absorption_coefficient);
    emit("trap.drive_amplitude", cfg.trap.drive_amplitude);
    emit("trap.drive_frequency_rad", cfg.trap.drive_frequency);
    if (!cfg.trap.geometric_efficiency_defaulted)
        emit("trap.geometric_efficiency", cfg.trap.geometric_efficiency);
    emit("trap.dc_geometric_efficiency", cfg.trap.dc_geometric_efficiency);
    if (!cfg.trap.characteristic_distance_defaulted)
        emit("trap.characteristic_distance", cfg.trap.characteristic_distance);
    emit("trap.dc_voltage", cfg.trap.dc_voltage);
    emit("trap.radial_asymmetry", cfg.trap.radial_asymmetry);
    emit("trap.electrode_coupling_x", cfg.trap.electrode_coupling[0]);
    emit("trap.electrode_coupling_y", cfg.trap.electrode_coupling[1]);
    emit("trap.electrode_coupling_z", cfg.trap.electrode_coupling[2]);
    emit("environment.pressure", cfg.environment.pressure);
    emit("environment.gas_temperature", cfg.environment.gas_temperature);
    emit("environment.gas_molecule_mass", cfg.environment.gas_molecule_mass);
    if (cfg.environment.stray_drift) {
        const auto& s = *cfg.environment.stray_drift;
        emit("environment.stray_field_x", s.initial_field[0]);
        emit("environment.stray_field_y", s.initial_field[1]);
        emit("environment.stray_field_z", s.initial_field[2]);
        emit("environment.stray_decay_time", s.decay_time);
    }
    if (cfg.environment.drive_drift) {
        emit("environment.drive_drift_delta", cfg.environment.drive_drift->delta);
        emit("environment.drive_drift_decay_time", cfg.environment.drive_drift->decay_time);
    }
    emit("detection.conversion_x", cfg.detection.conversion[0]);
    emit("detection.conversion_y", cfg.detection.conversion[1]);
    emit("detection.conversion_z", cfg.detection.conversion[2]);
    emit("detection.noise_floor", cfg.detection.noise_floor);
    emit("detection.quadratic_coefficient", cfg.detection.quadratic_coefficient);
    static const char* axes = "xyz";
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            emit(std::string("detection.crosstalk_") + axes[i] + axes[j],
                 cfg.detection.crosstalk[i][j]);
    emit("feedback.frequency", cfg.feedback.center_frequency);
    emit("feedback.bandwidth", cfg.feedback.filter_bandwidth);
    emit("feedback.gain", cfg.feedback.gain);
    emit("feedback.phase", cfg.feedback.demodulation_phase);
    emit("feedback.acbandwidth", cfg.feedback.ac_coupling_bandwidth);
    emit("feedback.saturation", cfg.feedback.saturation);
    emit("feedback.delay_samples", double(cfg.feedback.delay_samples));
    out << "feedback.axis = " << axis_name(cfg.feedback.target_axis) << "\n";
    emit("simulation.duration", cfg.simulation.duration);
    emit("simulation.sample_rate", cfg.simulation.sample_rate);
    out << "simulation.seed = " << cfg.simulation.seed << "\n";
    return out.str();
}

} // namespace levitrap
