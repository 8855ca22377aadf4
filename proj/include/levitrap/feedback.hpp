#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "levitrap/dynamics.hpp"
#include "levitrap/signal.hpp"

// IQ-demodulation cold damping: a digital lock-in (high-pass, demodulate,
// low-pass both quadratures, remodulate with adjustable phase) drives the
// cooling electrode. Phase 90/270 deg turns a displacement input into a
// velocity-proportional output; the sign picks damping vs anti-damping.
namespace levitrap {

/// Streaming IQ filter. Call step() in sample order at a fixed rate of at
/// least 20x the center frequency.
class IqController {
  public:
    IqController(const IqFeedbackConfig& cfg, double sample_rate)
        : cfg_(cfg), dt_(1.0 / sample_rate) {
        cfg.validate();
        if (!(sample_rate >= 20.0 * cfg.center_frequency))
            throw validation_error("IQ controller sample rate must be >= 20 * center frequency");
        const double wc = 2.0 * constants::pi * cfg.center_frequency;
        dphase_ = wc * dt_;
        if (cfg.ac_coupling_bandwidth > 0.0) {
            const double tau = 1.0 / (2.0 * constants::pi * cfg.ac_coupling_bandwidth);
            hp_alpha_ = tau / (tau + dt_);
        }
        lp_beta_ = 1.0 - std::exp(-2.0 * constants::pi * (cfg.filter_bandwidth / 2.0) * dt_);
        const double phi = cfg.demodulation_phase * constants::pi / 180.0;
        cos_phi_ = std::cos(phi);
        sin_phi_ = std::sin(phi);
    }

    double step(double input) {
        // (1) AC coupling
        double y = input;
        if (hp_alpha_ > 0.0) {
            y = hp_alpha_ * (hp_out_ + input - hp_in_);
            hp_in_ = input;
            hp_out_ = y;
        }
        // (2) demodulate against the reference oscillator; low-pass the
        // quadratures (factor 2 restores unit passband gain)
        const double c = std::cos(phase_), s = std::sin(phase_);
        zi_ += lp_beta_ * (2.0 * y * c - zi_);
        zq_ += lp_beta_ * (-2.0 * y * s - zq_);
        // (3) remodulate with the demodulation phase applied
        const double cp = c * cos_phi_ - s * sin_phi_;
        const double sp = s * cos_phi_ + c * sin_phi_;
        double out = cfg_.gain * (zi_ * cp - zq_ * sp);
        phase_ += dphase_;
        if (phase_ > constants::pi) phase_ -= 2.0 * constants::pi;
        // output clamp mirrors the FPGA DAC range
        if (out > cfg_.saturation) out = cfg_.saturation;
        if (out < -cfg_.saturation) out = -cfg_.saturation;
        return out;
    }

    const IqFeedbackConfig& config() const { return cfg_; }

  private:
    IqFeedbackConfig cfg_;
    double dt_;
    double dphase_ = 0.0, phase_ = 0.0;
    double hp_alpha_ = 0.0, hp_in_ = 0.0, hp_out_ = 0.0;
    double lp_beta_ = 0.0, zi_ = 0.0, zq_ = 0.0;
    double cos_phi_ = 1.0, sin_phi_ = 0.0;
};

/// Spec-style single-sample entry point.
inline double iq_step(double input_sample, IqController& state) { return state.step(input_sample); }

/// Demodulation phase that damps velocity for a displacement input, given
/// the loop delay (controller latency in samples).
inline double velocity_damping_phase(const IqFeedbackConfig& cfg, double sample_rate) {
    const double wc = 2.0 * constants::pi * cfg.center_frequency;
    double phase = 270.0 - wc * (cfg.delay_samples / sample_rate) * 180.0 / constants::pi;
    while (phase < 0.0) phase += 360.0;
    while (phase >= 360.0) phase -= 360.0;
    return phase;
}

struct ModeTemperature {
    double temperature = 0.0; // K
    double uncertainty = 0.0; // K
    std::string mode = "y";
    std::string method = "area-ratio";
};

struct CoolResult {
    SimTrajectory trajectory;
    VoltageTrace detector; // in-loop detector samples (with noise)
    VoltageTrace feedback; // controller output voltage
    bool heating = false;
    double mode_frequency = 0.0;     // rad/s, exact secular frequency of the target
    double predicted_gamma_fb = 0.0; // kappa * gain * conversion / (m * omega)
};

namespace detail {

struct IqLoopHook {
    IqController controller;
    const DetectionConfig* det;
    const std::array<double, 3>* crosstalk_row;
    double conversion_noise_scale;
    Rng noise_rng;
    int axis;
    double kappa;
    int delay;
    std::deque<double> delay_line;
    std::vector<double>* detector_out;
    std::vector<double>* feedback_out;
    // heating monitor
    double mass, omega2, energy_limit;
    double smoothed_energy = 0.0, smoothing = 0.0;
    bool heating = false;

    std::array<double, 3> force(std::size_t, double, const std::array<double, 3>& x,
                                const std::array<double, 3>& v) {
        double sample = 0.0;
        for (int j = 0; j < 3; ++j) sample += (*crosstalk_row)[j] * det->conversion[j] * x[j];
        if (det->quadratic_coefficient != 0.0) {
            const double lin = det->conversion[axis] * x[axis];
            sample += (*crosstalk_row)[axis] * det->quadratic_coefficient * lin * lin;
        }
        sample += conversion_noise_scale * noise_rng.gaussian();
        const double out = controller.step(sample);
        detector_out->push_back(sample);
        feedback_out->push_back(out);
        // delay_line is pre-filled with `delay` zeros: applied = out[n - delay]
        delay_line.push_back(out);
        const double applied = delay_line.front();
        delay_line.pop_front();

        const double mode_energy =
            0.5 * mass * (v[axis] * v[axis] + omega2 * x[axis] * x[axis]);
        smoothed_energy += smoothing * (mode_energy - smoothed_energy);
        if (smoothed_energy > energy_limit) heating = true;

        std::array<double, 3> f{0.0, 0.0, 0.0};
        f[axis] = kappa * applied;
        return f;
    }
};

} // namespace detail

struct CoolOptions {
    SimOptions sim;
    bool stop_on_heating = true;
};

/// Run the closed loop: detector -> IQ controller -> cooling electrode.
/// A run whose target-mode energy grows past 10x thermal is flagged
/// `heating` (anti-damping phase), not an error.
inline CoolResult closed_loop_cool(const ParticleSpec& particle, const TrapConfig& trap,
                                   const Environment& env, const DetectionConfig& det,
                                   const IqFeedbackConfig& cfg, double duration,
                                   double sample_rate, std::uint64_t seed,
                                   const CoolOptions& opts = {}) {
    det.validate();
    cfg.validate();
    const auto mp = mathieu_parameters(particle, trap);
    if (!is_stable(mp)) throw validation_error("closed_loop_cool requires a stable trap");
    const int ax = int(cfg.target_axis);
    const double omega_mode = beta_exact(mp.a[ax], mp.q[ax]) * trap.drive_frequency / 2.0;
    const double f_mode = omega_mode / (2.0 * constants::pi);
    if (std::abs(cfg.center_frequency - f_mode) > 2.0 * cfg.filter_bandwidth)
        throw validation_error("feedback.frequency is more than 2 bandwidths from the " +
                               std::string(axis_name(cfg.target_axis)) + " mode at " +
                               std::to_string(f_mode) + " Hz");

    CoolResult result;
    result.mode_frequency = omega_mode;
    result.predicted_gamma_fb = trap.electrode_coupling[ax] * cfg.gain * det.conversion[ax] /
                                (particle.mass * omega_mode);

    detail::IqLoopHook hook{
        IqController(cfg, sample_rate),
        &det,
        &det.crosstalk[ax],
        det.noise_floor > 0.0 ? std::sqrt(det.noise_floor * sample_rate / 2.0) : 0.0,
        Rng(stream_seed(seed, 0x10F)),
        ax,
        trap.electrode_coupling[ax],
        cfg.delay_samples,
        {},
        nullptr,
        nullptr,
        particle.mass,
        omega_mode * omega_mode,
        10.0 * 3.0 * constants::k_boltzmann * env.gas_temperature,
        0.0,
        0.0,
        false};
    hook.delay_line.assign(std::size_t(cfg.delay_samples), 0.0);
    // smoothing over ~20 mode periods
    hook.smoothing = 1.0 - std::exp(-f_mode / (20.0 * sample_rate) * 2.0 * constants::pi);
    std::vector<double> det_samples, fb_samples;
    hook.detector_out = &det_samples;
    hook.feedback_out = &fb_samples;

    result.trajectory = simulate_hooked(particle, trap, env, DriveSpec{}, duration, sample_rate,
                                        seed, opts.sim, hook);
    result.heating = hook.heating;
    result.detector = VoltageTrace{sample_rate, std::move(det_samples), axis_name(cfg.target_axis)};
    result.feedback = VoltageTrace{sample_rate, std::move(fb_samples), axis_name(cfg.target_axis)};
    return result;
}

/// Area-ratio thermometry: T = T_cal * A_cooled / A_cal with both areas
/// noise-floor subtracted; the uncertainty is the spread between numeric
/// integration and the fitted-curve area.
inline ModeTemperature mode_temperature(const Psd& cooled_psd, const Psd& calibration_psd,
                                        double calibration_temperature, double f_lo, double f_hi,
                                        const std::string& mode_label = "y") {
    LorentzianFit cal_fit, cooled_fit;
    try {
        cal_fit = fit_lorentzian(calibration_psd, f_lo, f_hi);
    } catch (const numerical_error&) {
        throw validation_error("mode_temperature: no resonance found in the calibration window");
    }
    try {
        cooled_fit = fit_lorentzian(cooled_psd, f_lo, f_hi);
    } catch (const numerical_error&) {
        throw validation_error("mode_temperature: no resonance found in the cooled window");
    }
    const double a_cal = cal_fit.numeric_area;
    const double a_cooled = cooled_fit.numeric_area;
    if (!(a_cal > 0.0))
        throw validation_error("mode_temperature: calibration mode area is not positive");
    ModeTemperature out;
    out.mode = mode_label;
    out.temperature = calibration_temperature * a_cooled / a_cal;
    out.uncertainty =
        std::abs(cooled_fit.numeric_area - cooled_fit.area) / a_cal * calibration_temperature;
    return out;
}

struct GainSweepPoint {
    double gain = 0.0;
    ModeTemperature temperature;
    double predicted_gamma_fb = 0.0;
    double gas_damping = 0.0;
    bool heating = false;
};

struct GainSweepOptions {
    double min_duration = 1.0;       // s, floor on the per-gain run length
    double settle_factor = 50.0;     // duration >= settle_factor/(gamma+gamma_fb)
    double window_half_width = 250.0; // Hz, thermometry window around the mode
    double sample_rate = 0.0;        // 0: pick 50x drive frequency
    // Thermometry detector for the out-of-loop measurement; defaults to the
    // loop detector. A cooled line can sit below the loop's noise floor, so
    // a quieter out-of-loop channel (second detector) is the realistic way
    // to read sub-kelvin temperatures.
    std::optional<DetectionConfig> measurement_detection;
};

/// Cooling gain sweep against a fixed calibration PSD. Each run gets its own
/// RNG stream; results are ordered like `gains`.
inline std::vector<GainSweepPoint>
gain_sweep(const ParticleSpec& particle, const TrapConfig& trap, const Environment& env,
           const DetectionConfig& det, const IqFeedbackConfig& cfg_template,
           const std::vector<double>& gains, const Psd& calibration_psd,
           double calibration_temperature, std::uint64_t master_seed,
           const GainSweepOptions& opts = {}) {
    const double gamma = epstein_damping(particle, env);
    const double fs = opts.sample_rate > 0.0
                          ? opts.sample_rate
                          : 50.0 * trap.drive_frequency / (2.0 * constants::pi);
    std::vector<GainSweepPoint> out;
    out.reserve(gains.size());
    const auto mp = mathieu_parameters(particle, trap);
    const int ax = int(cfg_template.target_axis);
    const double omega_mode = beta_exact(mp.a[ax], mp.q[ax]) * trap.drive_frequency / 2.0;
    for (std::size_t i = 0; i < gains.size(); ++i) {
        IqFeedbackConfig cfg = cfg_template;
        cfg.gain = gains[i];
        GainSweepPoint point;
        point.gain = gains[i];
        point.gas_damping = gamma;
        point.predicted_gamma_fb = trap.electrode_coupling[ax] * cfg.gain *
                                   det.conversion[ax] / (particle.mass * omega_mode);
        // duration long enough to settle and average
        CoolOptions copts;
        copts.sim.record_velocities = false;
        const std::uint64_t seed = stream_seed(master_seed, i);
        const double gamma_total = gamma + point.predicted_gamma_fb;
        const double duration = std::max(opts.min_duration, opts.settle_factor / gamma_total);
        auto run = closed_loop_cool(particle, trap, env, det, cfg, duration, fs, seed, copts);
        point.heating = run.heating;
        if (!run.heating) {
            // out-of-loop measurement: an independent detector channel
            const DetectionConfig& meas =
                opts.measurement_detection ? *opts.measurement_detection : det;
            const auto traces = transduce(run.trajectory, meas, stream_seed(seed, 0x001));
            const std::size_t seg = std::min<std::size_t>(
                std::size_t(1) << std::size_t(std::log2(double(run.trajectory.size()) / 4.0)),
                1 << 20);
            const auto psd = welch_psd(traces[ax], seg);
            const double f_mode = run.mode_frequency / (2.0 * constants::pi);
            point.temperature = mode_temperature(
                psd, calibration_psd, calibration_temperature, f_mode - opts.window_half_width,
                f_mode + opts.window_half_width, axis_name(cfg.target_axis));
        }
        out.push_back(std::move(point));
    }
    return out;
}

} // namespace levitrap
