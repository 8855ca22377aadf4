#pragma once

#include <cmath>
#include <vector>

#include "levitrap/characterize.hpp"
#include "levitrap/feedback.hpp"
#include "levitrap/signal.hpp"

// End-to-end measurement pipelines built from the lower modules: synthetic
// ground-truth scans (simulate -> transduce -> PSD -> line fit) and the
// two-pass resonance measurement they rely on.
namespace levitrap {

namespace detail {

inline std::size_t floor_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p * 2 <= n) p *= 2;
    return p;
}

} // namespace detail

/// Peak-find inside [f_lo, f_hi], then fit twice: a coarse window around the
/// peak bin, then +-8 fitted linewidths.
inline LorentzianFit measure_resonance(const Psd& psd, double f_lo, double f_hi,
                                       LineModel model = LineModel::lorentzian) {
    const double f_pk = psd.peak_frequency(f_lo, f_hi);
    const double coarse = std::max(20.0 * psd.df(), 0.02 * f_pk);
    LorentzianFit fit = fit_lorentzian(psd, std::max(f_lo, f_pk - coarse),
                                       std::min(f_hi, f_pk + coarse), model);
    const double half = std::max(8.0 * fit.linewidth, 10.0 * psd.df());
    return fit_lorentzian(psd, std::max(f_lo, fit.center_frequency - half),
                          std::min(f_hi, fit.center_frequency + half), model);
}

struct SyntheticScanOptions {
    double point_duration = 2.0; // s per scan point
    double snr_db = 30.0;        // noise floor below the thermal peak
    std::size_t segment_length = 1 << 20;
    bool quick = false;          // skip the simulation, jitter the closed form
    double quick_jitter = 1e-3;  // relative frequency jitter in quick mode
};

/// One-sided PSD peak of a thermal mode in detector volts.
inline double thermal_peak_level(double conversion, double mass, double temperature, double omega,
                                 double gamma) {
    const double x2 = constants::k_boltzmann * temperature / (mass * omega * omega);
    return conversion * conversion * 4.0 * x2 / gamma;
}

/// Axial-frequency scan over drive amplitudes through the full measurement
/// chain. The detector noise floor sits snr_db below each point's thermal
/// peak. Ground truth comes from cfg.particle's charge and mass.
inline std::vector<QmScanPoint>
synthesize_qm_scan(const SystemConfig& cfg, const std::vector<double>& amplitudes,
                   std::uint64_t seed, const SyntheticScanOptions& opts = {}) {
    std::vector<QmScanPoint> points;
    points.reserve(amplitudes.size());
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
        const double v0 = amplitudes[i];
        TrapConfig trap = cfg.trap;
        trap.drive_amplitude = v0;
        const auto mp = mathieu_parameters(cfg.particle, trap);
        const double omega_true = beta_exact(mp.a[2], mp.q[2]) * trap.drive_frequency / 2.0;
        if (opts.quick) {
            Rng rng(stream_seed(seed, i));
            points.push_back({v0, omega_true * (1.0 + opts.quick_jitter * rng.gaussian())});
            continue;
        }
        const double gamma = epstein_damping(cfg.particle, cfg.environment);
        const double fs = 50.0 * trap.drive_frequency / (2.0 * constants::pi);
        DriveSpec none;
        SimOptions sim_opts;
        sim_opts.record_velocities = false;
        const auto traj = simulate(cfg.particle, trap, cfg.environment, none,
                                   opts.point_duration, fs, stream_seed(seed, i), sim_opts);
        DetectionConfig det = cfg.detection;
        det.noise_floor = thermal_peak_level(det.conversion[2], cfg.particle.mass,
                                             cfg.environment.gas_temperature, omega_true, gamma) /
                          std::pow(10.0, opts.snr_db / 10.0);
        const auto traces = transduce(traj, det, stream_seed(seed, i) ^ 0x5eed);
        const std::size_t seg =
            detail::floor_pow2(std::min(opts.segment_length, traces[2].samples.size() / 2));
        const auto psd = welch_psd(traces[2], seg);
        const double f_true = omega_true / (2.0 * constants::pi);
        const auto fit = measure_resonance(psd, 0.7 * f_true, 1.4 * f_true);
        points.push_back({v0, 2.0 * constants::pi * fit.center_frequency});
    }
    return points;
}

/// Linewidth-vs-pressure scan through the full measurement chain. Uses the
/// damped-oscillator profile: at higher pressures the line is a few percent
/// of its center frequency and the symmetric Lorentzian would bias wide.
inline std::vector<PressureScanPoint>
synthesize_pressure_scan(const SystemConfig& cfg, const std::vector<double>& pressures,
                         std::uint64_t seed, const SyntheticScanOptions& opts = {}) {
    std::vector<PressureScanPoint> points;
    points.reserve(pressures.size());
    const auto mp = mathieu_parameters(cfg.particle, cfg.trap);
    const double omega_true = beta_exact(mp.a[2], mp.q[2]) * cfg.trap.drive_frequency / 2.0;
    const double fs = 50.0 * cfg.trap.drive_frequency / (2.0 * constants::pi);
    for (std::size_t i = 0; i < pressures.size(); ++i) {
        Environment env = cfg.environment;
        env.pressure = pressures[i];
        const double gamma = epstein_damping(cfg.particle, env);
        if (opts.quick) {
            Rng rng(stream_seed(seed, i));
            points.push_back({pressures[i], gamma * (1.0 + opts.quick_jitter * rng.gaussian())});
            continue;
        }
        DriveSpec none;
        SimOptions sim_opts;
        sim_opts.record_velocities = false;
        const auto traj = simulate(cfg.particle, cfg.trap, env, none, opts.point_duration, fs,
                                   stream_seed(seed, i), sim_opts);
        DetectionConfig det = cfg.detection;
        det.noise_floor = thermal_peak_level(det.conversion[2], cfg.particle.mass,
                                             env.gas_temperature, omega_true, gamma) /
                          std::pow(10.0, opts.snr_db / 10.0);
        const auto traces = transduce(traj, det, stream_seed(seed, i) ^ 0x5eed);
        const double f_true = omega_true / (2.0 * constants::pi);
        // Two-stage segmenting: a coarse many-average pass locates the line
        // and sizes its width, then the segment length is rechosen so the
        // resolution bandwidth sits well under the linewidth while keeping
        // as many averages as the trace allows.
        const std::size_t n = traces[2].samples.size();
        const auto coarse_psd = welch_psd(traces[2], detail::floor_pow2(n / 16));
        const auto coarse = measure_resonance(coarse_psd, 0.6 * f_true, 1.5 * f_true,
                                              LineModel::thermal_oscillator);
        const double target_rbw = std::max(coarse.linewidth / 8.0, 3.0 * fs / double(n));
        std::size_t seg = detail::floor_pow2(std::size_t(1.5 * fs / target_rbw));
        seg = std::min(seg, detail::floor_pow2(n / 4));
        seg = std::max<std::size_t>(seg, 4096);
        const auto psd = welch_psd(traces[2], seg);
        const auto fit =
            measure_resonance(psd, 0.6 * f_true, 1.5 * f_true, LineModel::thermal_oscillator);
        points.push_back({pressures[i], 2.0 * constants::pi * fit.linewidth});
    }
    return points;
}

} // namespace levitrap
