// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Each criterion carries its runtime budget; tolerances are pinned in
// the assertions below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "levitrap/cli.hpp"

using namespace levitrap;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "FAILED[" << what << "] ";
        } else {
            detail << what << " ";
        }
    }
};

struct Criterion {
    int id;
    std::string title;
    double budget_s;
    std::function<void(Check&)> body;
};

fs::path work_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "levitrap_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// the 91 nm, Q/m = 75 C/kg nanodiamond in the 25 kHz end-cap drive
SystemConfig base_config(double qz, double asymmetry = 0.0) {
    SystemConfig cfg = cli::default_config();
    cfg.trap.radial_asymmetry = asymmetry;
    cfg.trap.drive_amplitude = qz / qz_of(cfg.particle.charge_to_mass(), 1.0, cfg.trap);
    return cfg;
}

double mean_square_tail(const std::vector<double>& v, std::size_t skip) {
    double s = 0.0;
    for (std::size_t i = skip; i < v.size(); ++i) s += v[i] * v[i];
    return s / double(v.size() - skip);
}

// ---------------------------------------------------------------------------

void criterion_dp_benchmark(Check& c) {
    const auto dir = work_dir("dp");
    const int rc = cli::run_cli({"decohere", "--dp", "--mass", "1e-15", "--sep", "2e-6",
                                 "--density", "3500", "--out", dir.string()});
    c.require(rc == 0, "exit=0");
    const auto report = nlohmann::json::parse(slurp(dir / "decohere_report.json"));
    const double tau = report.at("lifetime_s").get<double>();
    c.detail << "tau=" << tau << "s ";
    c.require(tau >= 0.5 && tau <= 0.8, "tau in [0.5,0.8]");
}

void criterion_overlap_factor(Check& c) {
    const double low = 2.0 - 1.5 + 0.2;   // polynomial branch at lambda = 1
    const double high = 1.2 - 0.5;        // far branch at lambda = 1
    c.require(std::abs(dp_overlap_factor(1.0) - 0.7) < 1e-15, "f(1)=0.7");
    c.require(std::abs(low - 0.7) < 1e-15 && std::abs(high - 0.7) < 1e-15, "both branches");
    c.require(std::abs(dp_overlap_factor(1.0 - 1e-13) - dp_overlap_factor(1.0 + 1e-13)) < 1e-12,
              "continuity@1e-12");
    c.require(std::abs(dp_overlap_factor(1e6) - 1.2) < 1e-6, "f(1e6)=1.2@1e-6");
}

void criterion_gas_benchmark(Check& c) {
    const double p_mbar = min_pressure(100e-6, 20e-9, constants::mass_n2, 300.0, 1.0) / 100.0;
    c.detail << "min_pressure=" << p_mbar << "mbar ";
    c.require(p_mbar >= 0.5 * 6e-8 && p_mbar <= 2.0 * 6e-8, "within 2x of 6e-8 mbar");
}

void criterion_qm_roundtrip(Check& c) {
    SystemConfig cfg = cli::default_config();
    const double qm_true = 75.0;
    cfg.particle.charge = qm_true * cfg.particle.mass;
    const double v_max = 0.3 / qz_of(qm_true, 1.0, cfg.trap); // q_max = 0.3
    std::vector<double> amplitudes;
    for (int i = 1; i <= 5; ++i) amplitudes.push_back(v_max * i / 5.0);
    SyntheticScanOptions opts;
    opts.snr_db = 30.0;
    opts.point_duration = 2.0;
    const auto scan = synthesize_qm_scan(cfg, amplitudes, 20250, opts);
    const auto approx = fit_charge_to_mass(scan, cfg.trap, BetaMethod::approx);
    const auto exact = fit_charge_to_mass(scan, cfg.trap, BetaMethod::exact);
    c.detail << "approx=" << approx.charge_to_mass << " exact=" << exact.charge_to_mass << " ";
    c.require(std::abs(approx.charge_to_mass - qm_true) / qm_true <= 0.05, "approx@5%");
    c.require(std::abs(exact.charge_to_mass - qm_true) / qm_true <= 0.02, "exact@2%");
}

void criterion_mass_roundtrip(Check& c) {
    // Small q_z: gas drag on the micromotion shifts the secular linewidth at
    // O(q^2), so the linewidth-slope method is exact only in the weak-drive
    // limit the measurement assumes.
    SystemConfig cfg = base_config(0.10);
    cfg.particle = ParticleSpec::from_radius_density(91e-9, 3040.0, 75.0 * 9.6e-18);
    const std::vector<double> pressures{1.6, 2.85, 5.06, 9.0, 16.0}; // one decade
    SyntheticScanOptions opts;
    opts.snr_db = 30.0;
    opts.point_duration = 10.0;
    const auto scan = synthesize_pressure_scan(cfg, pressures, 20251, opts);
    const auto fit = fit_radius(scan, 3040.0, cfg.environment);
    c.detail << "R=" << fit.radius * 1e9 << "nm m=" << fit.mass << "kg ";
    c.require(std::abs(fit.radius - 91e-9) / 91e-9 <= 0.03, "radius@3%");
    c.require(std::abs(fit.mass - 9.6e-18) / 9.6e-18 <= 0.10, "mass@10%");
}

void criterion_equipartition_calibration(Check& c) {
    // (a) free thermal motion at 300 K reproduces k_B T/(m omega^2) per axis
    SystemConfig cfg = base_config(0.15);
    cfg.environment.pressure = 50.0;
    DriveSpec none;
    SimOptions opts;
    const double fs = 50.0 * cfg.trap.drive_frequency / (2.0 * constants::pi);
    const auto traj =
        simulate(cfg.particle, cfg.trap, cfg.environment, none, 10.0, fs, 20252, opts);
    const auto mp = mathieu_parameters(cfg.particle, cfg.trap);
    const auto w = secular_frequencies(mp, cfg.trap.drive_frequency, BetaMethod::exact);
    const double kT = constants::k_boltzmann * cfg.environment.gas_temperature;
    for (int ax = 0; ax < 3; ++ax) {
        const double expected = kT / (cfg.particle.mass * w[ax] * w[ax]);
        const double measured = mean_square_tail(traj.positions[ax], 0);
        c.detail << axis_name(Axis(ax)) << "=" << measured / expected << " ";
        c.require(std::abs(measured / expected - 1.0) <= 0.05, "equipartition@5%");
    }

    // (b) volts-to-meters calibration inverts the configured conversion
    Environment cal_env = cfg.environment;
    cal_env.pressure = 5.0;
    SimOptions cal_opts;
    cal_opts.record_velocities = false;
    const auto cal_traj =
        simulate(cfg.particle, cfg.trap, cal_env, none, 12.0, fs, 20253, cal_opts);
    DetectionConfig det = cfg.detection;
    det.noise_floor = 1e-13;
    const auto trace = transduce(cal_traj, det, 5)[2];
    const auto psd = welch_psd(trace, 1 << 20);
    const double fz = w[2] / (2 * constants::pi);
    const double v2 = mode_area(psd, fz, 700.0);
    const double s = calibrate_conversion(v2, cal_env.gas_temperature, cfg.particle.mass, w[2]);
    c.detail << "S*c=" << s * det.conversion[2] << " ";
    c.require(std::abs(s * det.conversion[2] - 1.0) <= 0.05, "calibration@5%");
}

void criterion_secular_structure(Check& c) {
    // symmetric trap: radial modes degenerate, axial/radial ratio 2 within 2%
    SystemConfig cfg = base_config(0.30, 0.0);
    DriveSpec none;
    SimOptions opts;
    opts.record_velocities = false;
    const double fs = 50.0 * cfg.trap.drive_frequency / (2.0 * constants::pi);
    const auto traj = simulate(cfg.particle, cfg.trap, cfg.environment, none, 4.0, fs, 20254, opts);
    const auto psd_x = welch_psd(VoltageTrace{fs, traj.positions[0], "x"}, 1 << 19);
    const auto psd_z = welch_psd(VoltageTrace{fs, traj.positions[2], "z"}, 1 << 19);
    const auto fx = measure_resonance(psd_x, 400.0, 2300.0);
    const auto fz = measure_resonance(psd_z, 2300.0, 4500.0);
    const double ratio = fz.center_frequency / fx.center_frequency;
    c.detail << "ratio=" << ratio << " ";
    c.require(std::abs(ratio / 2.0 - 1.0) <= 0.02, "omega_z/omega_r=2@2%");

    // asymmetric trap: the radial line splits in two
    SystemConfig split_cfg = base_config(0.30, 0.05);
    const auto traj2 =
        simulate(split_cfg.particle, split_cfg.trap, split_cfg.environment, none, 4.0, fs, 20255,
                 opts);
    const auto psd_xy = welch_psd(VoltageTrace{fs, traj2.positions[0], "x"}, 1 << 19);
    const auto psd_y = welch_psd(VoltageTrace{fs, traj2.positions[1], "y"}, 1 << 19);
    const auto peak_x = measure_resonance(psd_xy, 400.0, 2300.0);
    const auto peak_y = measure_resonance(psd_y, 400.0, 2300.0);
    const double split = peak_x.center_frequency / peak_y.center_frequency;
    c.detail << "x/y=" << split << " ";
    c.require(split > 1.05, "two split radial peaks");
    c.require(std::abs(split - 1.05 / 0.95) < 0.02, "split=(1+eps)/(1-eps)");
}

void criterion_stability_boundary(Check& c) {
    DriveSpec none;
    SimOptions opts;
    opts.thermal_noise = false;
    for (double qz : {0.85, 0.95}) {
        SystemConfig cfg = base_config(qz);
        cfg.environment.pressure = 0.0; // undamped
        const double fs = 50.0 * cfg.trap.drive_frequency / (2.0 * constants::pi);
        const auto traj =
            simulate(cfg.particle, cfg.trap, cfg.environment, none, 0.05, fs, 20256, opts);
        const bool stable = is_stable(mathieu_parameters(cfg.particle, cfg.trap));
        c.detail << "q=" << qz << (traj.escaped ? " escaped " : " bounded ");
        if (qz < 0.908) {
            c.require(!traj.escaped && stable, "bounded and is_stable@0.85");
        } else {
            c.require(traj.escaped && !stable, "escaped and !is_stable@0.95");
        }
    }
}

void criterion_cooling(Check& c) {
    // 8.0e-5 mbar, y-mode cooling. The filter sits wide (600 Hz) so the
    // cold-damping law is not bandwidth-limited over the swept gains.
    SystemConfig cfg = base_config(0.35, 0.1);
    cfg.environment.pressure = 8.0e-3; // 8.0e-5 mbar
    cfg.detection.conversion = {1000.0, 1000.0, 1000.0};
    cfg.trap.electrode_coupling = {1.7e-16, 1.7e-16, 1.7e-16};
    const double fs = 50.0 * cfg.trap.drive_frequency / (2.0 * constants::pi);
    const auto mp = mathieu_parameters(cfg.particle, cfg.trap);
    const double omega_y = beta_exact(mp.a[1], mp.q[1]) * cfg.trap.drive_frequency / 2.0;
    const double f_y = omega_y / (2.0 * constants::pi);
    const double gamma = epstein_damping(cfg.particle, cfg.environment);
    const double kT = constants::k_boltzmann * 300.0;
    const double unit_gain = cfg.trap.electrode_coupling[1] * cfg.detection.conversion[1] /
                             (cfg.particle.mass * omega_y); // gamma_fb per unit gain

    IqFeedbackConfig fb;
    fb.center_frequency = f_y;
    fb.filter_bandwidth = 600.0;
    fb.ac_coupling_bandwidth = 150.0;
    fb.target_axis = Axis::y;
    fb.delay_samples = 1;
    fb.demodulation_phase = velocity_damping_phase(fb, fs);

    // (a) noise-free limit matches T0 gamma/(gamma+gamma_fb) within 20%
    for (double gamma_fb : {25.0, 50.0, 100.0}) {
        IqFeedbackConfig run_cfg = fb;
        run_cfg.gain = gamma_fb / unit_gain;
        CoolOptions copts;
        copts.sim.record_velocities = false;
        const double duration = 400.0 / (gamma + gamma_fb);
        const auto run = closed_loop_cool(cfg.particle, cfg.trap, cfg.environment, cfg.detection,
                                          run_cfg, duration, fs, 20257, copts);
        const double t_meas =
            cfg.particle.mass * omega_y * omega_y *
            mean_square_tail(run.trajectory.positions[1], run.trajectory.size() / 4) /
            constants::k_boltzmann;
        const double t_theory = 300.0 * gamma / (gamma + gamma_fb);
        c.detail << "T(" << gamma_fb << ")=" << t_meas << "/" << t_theory << " ";
        c.require(std::abs(t_meas / t_theory - 1.0) <= 0.20, "noise-free@20%");
    }

    // (b) noisy sweep: noise floor 30 dB below the thermal peak of the mode
    // as measured at the acceptance resolution bandwidth (50 Hz; the
    // 0.04 Hz-wide intrinsic line at this pressure is unresolved)
    const double rbw_ref = 50.0;
    const double x2_thermal = kT / (cfg.particle.mass * omega_y * omega_y);
    const double peak_meas =
        cfg.detection.conversion[1] * cfg.detection.conversion[1] * x2_thermal / rbw_ref;
    DetectionConfig noisy = cfg.detection;
    noisy.noise_floor = peak_meas / 1000.0;

    // calibration trace at 1.62e-2 mbar, thermal equilibrium, read through
    // the quiet out-of-loop channel used for all thermometry
    Environment cal_env = cfg.environment;
    cal_env.pressure = 1.62;
    DriveSpec none;
    SimOptions cal_opts;
    cal_opts.record_velocities = false;
    const auto cal_traj =
        simulate(cfg.particle, cfg.trap, cal_env, none, 12.0, fs, 20258, cal_opts);
    const auto cal_psd = welch_psd(transduce(cal_traj, cfg.detection, 77)[1], 1 << 20);

    std::vector<double> gains;
    for (double gamma_fb : {25.0, 50.0, 100.0, 200.0, 400.0, 800.0})
        gains.push_back(gamma_fb / unit_gain);
    GainSweepOptions sweep_opts;
    sweep_opts.min_duration = 1.0;
    sweep_opts.settle_factor = 150.0;
    sweep_opts.window_half_width = 220.0;
    sweep_opts.sample_rate = fs;
    sweep_opts.measurement_detection = cfg.detection; // noise-free out-of-loop channel
    const auto points = gain_sweep(cfg.particle, cfg.trap, cfg.environment, noisy, fb, gains,
                                   cal_psd, 300.0, 20259, sweep_opts);
    double t_min = 1e9;
    std::size_t argmin = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        c.require(!points[i].heating, "no unexpected heating");
        const double t = points[i].temperature.temperature;
        c.detail << "T[g=" << points[i].gain << "]=" << t << " ";
        if (t < t_min) {
            t_min = t;
            argmin = i;
        }
    }
    for (std::size_t i = 0; i + 1 <= argmin; ++i)
        c.require(points[i + 1].temperature.temperature < points[i].temperature.temperature,
                  "monotone to the minimum");
    c.require(argmin > 0 && argmin + 1 < points.size(), "interior turnaround");
    c.require(points.back().temperature.temperature > 1.2 * t_min, "re-heats past the minimum");
    c.require(t_min <= 1.0, "min T <= 1 K");

    // (c) flipping the phase by 180 degrees heats
    IqFeedbackConfig flipped = fb;
    flipped.gain = 100.0 / unit_gain;
    flipped.demodulation_phase = std::fmod(fb.demodulation_phase + 180.0, 360.0);
    const auto hot = closed_loop_cool(cfg.particle, cfg.trap, cfg.environment, noisy, flipped,
                                      2.0, fs, 20260);
    c.require(hot.heating, "180deg flip heats");
}

void criterion_tickler(Check& c) {
    SystemConfig cfg = base_config(0.30, 0.1);
    cfg.environment.pressure = 1.62;
    cfg.trap.electrode_coupling = {1.7e-16, 1.7e-16, 1.7e-16};
    const double fs = 50.0 * cfg.trap.drive_frequency / (2.0 * constants::pi);
    const auto mp = mathieu_parameters(cfg.particle, cfg.trap);
    const double omega_y = beta_exact(mp.a[1], mp.q[1]) * cfg.trap.drive_frequency / 2.0;
    const double f_y = omega_y / (2.0 * constants::pi);
    const double gamma = epstein_damping(cfg.particle, cfg.environment);
    const double kT = constants::k_boltzmann * 300.0;
    const double x_rms = std::sqrt(kT / (cfg.particle.mass * omega_y * omega_y));
    // resonant voltage sized for a response of 10 thermal rms
    const double v_res = 10.0 * x_rms * cfg.particle.mass * gamma * omega_y /
                         cfg.trap.electrode_coupling[1];

    SimOptions opts;
    opts.record_velocities = false;
    const double duration = 4.0;
    DriveSpec none;
    auto psd_of = [&](const SimTrajectory& traj) {
        return welch_psd(VoltageTrace{fs, traj.positions[1], "y"}, 1 << 19);
    };
    const auto thermal =
        simulate(cfg.particle, cfg.trap, cfg.environment, none, duration, fs, 20261, opts);
    const auto driven = run_tickler(cfg.particle, cfg.trap, cfg.environment, Axis::y, v_res,
                                    omega_y, duration, fs, 20261, opts);
    const auto psd_th = psd_of(thermal);
    const auto psd_dr = psd_of(driven);
    const double peak_th = psd_th.median_level(f_y - 3.0, f_y + 3.0);
    const double peak_dr = psd_dr.median_level(f_y - 3.0, f_y + 3.0);
    const double rise_db = 10.0 * std::log10(peak_dr / peak_th);
    c.detail << "rise=" << rise_db << "dB ";
    c.require(rise_db >= 10.0, "resonant rise >= 10 dB");

    // off-resonant drive, detuned 10 gamma, at 10x the voltage still moves
    // the PSD less: matching the resonant effect needs >= 10x the voltage
    const double omega_off = omega_y + 10.0 * gamma;
    const double f_off = omega_off / (2.0 * constants::pi);
    const auto off = run_tickler(cfg.particle, cfg.trap, cfg.environment, Axis::y, 10.0 * v_res,
                                 omega_off, duration, fs, 20261, opts);
    const auto psd_off = psd_of(off);
    const double p_line_res = psd_dr.band_power(f_y - 6.0, f_y + 6.0) -
                              psd_th.band_power(f_y - 6.0, f_y + 6.0);
    const double p_line_off = psd_off.band_power(f_off - 6.0, f_off + 6.0) -
                              psd_th.band_power(f_off - 6.0, f_off + 6.0);
    const double required_voltage_ratio = 10.0 * std::sqrt(p_line_res / p_line_off);
    c.detail << "required_ratio=" << required_voltage_ratio << " ";
    c.require(required_voltage_ratio >= 10.0, "off-resonant needs >= 10x voltage");
}

void criterion_heat_balance(Check& c) {
    HeatBalanceAnchor anchor; // 165 W/mm^2, 0.03 /cm, 500 K over 300 K
    HeatBalanceModel model;
    model.radiative_constant = calibrate_radiative_constant(anchor);
    const auto particle =
        ParticleSpec::from_radius_density(91e-9, constants::density_nanodiamond, 0.0);
    const double t_low = internal_temperature_balance(0.637e6, particle, model);
    c.detail << "T(0.637)=" << t_low << "K ";
    c.require(t_low < 310.0, "balance at 0.637 W/mm^2 < 310 K");
    double prev = 0.0;
    bool monotone = true;
    for (double i_mm2 = 0.1; i_mm2 <= 200.0; i_mm2 *= 1.5) {
        const double t = internal_temperature_balance(i_mm2 * 1e6, particle, model);
        if (t <= prev) monotone = false;
        prev = t;
    }
    c.require(monotone, "monotone in intensity");
    c.require(std::abs(internal_temperature_balance(1.65e8, particle, model) - 500.0) < 1e-6,
              "anchor reproduced");
}

void criterion_determinism(Check& c) {
    const auto dir_a = work_dir("det_a");
    const auto dir_b = work_dir("det_b");
    const auto cfg_path = dir_a / "trap.cfg";
    {
        std::ofstream out(cfg_path);
        out << serialize_config(base_config(0.3, 0.05));
    }
    for (const auto& dir : {dir_a, dir_b}) {
        c.require(cli::run_cli({"simulate", "--config", cfg_path.string(), "--duration", "0.02",
                                "--seed", "99", "--out", dir.string(), "--csv"}) == 0,
                  "simulate rc=0");
        c.require(cli::run_cli({"psd", "--config", cfg_path.string(), "--traj",
                                (dir / "trajectory.bin").string(), "--segment", "8192",
                                "--noise-seed", "3", "--out", dir.string()}) == 0,
                  "psd rc=0");
        c.require(cli::run_cli({"fit-qm", "--synthetic", "--quick", "--seed", "5", "--out",
                                dir.string()}) == 0,
                  "fit-qm rc=0");
    }
    c.require(slurp(dir_a / "trajectory.csv") == slurp(dir_b / "trajectory.csv"),
              "trajectory bytes");
    c.require(slurp(dir_a / "psd_z.csv") == slurp(dir_b / "psd_z.csv"), "psd bytes");
    c.require(slurp(dir_a / "qm_scan.csv") == slurp(dir_b / "qm_scan.csv"), "scan bytes");
    c.require(slurp(dir_a / "qm_fit.json") == slurp(dir_b / "qm_fit.json"), "report bytes");
}

} // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "Diosi-Penrose lifetime benchmark", 1.0, criterion_dp_benchmark},
        {2, "overlap factor f(lambda) branch checks", 1.0, criterion_overlap_factor},
        {3, "gas-decoherence minimum pressure benchmark", 1.0, criterion_gas_benchmark},
        {4, "Q/m round trip through the full chain", 300.0, criterion_qm_roundtrip},
        {5, "radius/mass round trip through the full chain", 300.0, criterion_mass_roundtrip},
        {6, "equipartition variance and volts-to-meters calibration", 120.0,
         criterion_equipartition_calibration},
        {7, "secular mode structure and radial splitting", 120.0, criterion_secular_structure},
        {8, "stability boundary: bounded at 0.85, escaped at 0.95", 60.0,
         criterion_stability_boundary},
        {9, "cold-damping gain sweep, turnaround, sub-kelvin minimum", 600.0, criterion_cooling},
        {10, "tickler response on and off resonance", 120.0, criterion_tickler},
        {11, "laser heating vs radiative cooling balance", 1.0, criterion_heat_balance},
        {12, "byte-identical reruns at fixed seed", 120.0, criterion_determinism},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.body(check);
        } catch (const std::exception& e) {
            check.pass = false;
            check.detail << "exception: " << e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > criterion.budget_s) {
            check.pass = false;
            check.detail << "OVER BUDGET " << criterion.budget_s << "s ";
        }
        std::printf("[%s] %2d %-55s (%.1fs) %s\n", check.pass ? "PASS" : "FAIL", criterion.id,
                    criterion.title.c_str(), elapsed, check.detail.str().c_str());
        std::fflush(stdout);
        if (!check.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
