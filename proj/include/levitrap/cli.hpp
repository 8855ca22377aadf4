#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "levitrap/config.hpp"
#include "levitrap/decohere.hpp"
#include "levitrap/io.hpp"
#include "levitrap/pipelines.hpp"

// Batch command-line surface. Every command writes a run manifest first,
// then machine-readable reports (JSON) and plot data (CSV). Exit codes:
// 0 success, 2 validation/parse error, 3 numerical failure.
namespace levitrap::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_numerical = 3;

/// Built-in particle/trap/detection set used when no --config is given:
/// the 91 nm, Q/m = 75 C/kg particle in a 25 kHz end-cap drive.
inline SystemConfig default_config() {
    return parse_config("particle.radius = 91e-9\n"
                        "particle.density = 3040\n"
                        "particle.charge_to_mass = 75\n"
                        "trap.drive_frequency_khz = 25\n"
                        "trap.drive_amplitude = 5\n"
                        "trap.geometric_efficiency = 0.8\n"
                        "trap.characteristic_distance = 0.5e-3\n"
                        "trap.radial_asymmetry = 0.05\n"
                        "trap.electrode_coupling = 1.7e-16\n"
                        "environment.pressure = 1\n"
                        "detection.conversion = 2e4\n");
}

inline fs::path resolve_out_dir(std::string out) {
    if (out.empty()) {
        if (const char* env = std::getenv("LEVITRAP_OUT")) out = env;
    }
    if (out.empty()) out = ".";
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

inline SystemConfig load_or_default(const std::string& config_path) {
    return config_path.empty() ? default_config() : load_config(config_path);
}

inline std::vector<double> parse_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end != item.c_str() + item.size())
            throw parse_error(std::string(what) + ": '" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) throw parse_error(std::string(what) + ": empty list");
    return out;
}

inline void print_vs_reference(const std::string& label, double value, const std::string& unit,
                               double reference) {
    std::cout << label << " = " << value << " " << unit << "   (reference: " << reference << " "
              << unit << ")\n";
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string config_path, out_dir, sweep;
    double duration = 0.1;
    double sample_rate = 0.0;
    std::uint64_t seed = 1;
    bool csv = false;
    std::string tickler_axis;
    double tickler_volt = 0.0, tickler_freq = 0.0;
};

inline json run_one_simulation(const SystemConfig& cfg, const SimulateArgs& args,
                               std::uint64_t seed, const fs::path& dir) {
    DriveSpec drive;
    if (!args.tickler_axis.empty()) {
        drive.kind = DriveSpec::Kind::tickler;
        drive.axis = axis_from_name(args.tickler_axis);
        drive.amplitude = args.tickler_volt;
        drive.frequency = 2.0 * constants::pi * args.tickler_freq;
    }
    const double fs = args.sample_rate > 0.0
                          ? args.sample_rate
                          : (cfg.simulation.sample_rate > 0.0
                                 ? cfg.simulation.sample_rate
                                 : 50.0 * cfg.trap.drive_frequency / (2.0 * constants::pi));
    const auto traj =
        simulate(cfg.particle, cfg.trap, cfg.environment, drive, args.duration, fs, seed);
    io::write_trajectory_binary(dir / "trajectory.bin", traj);
    if (args.csv) io::write_trajectory_csv(dir / "trajectory.csv", traj);
    json summary{{"status", traj.escaped ? "escaped" : "ok"},
                 {"n_samples", traj.size()},
                 {"sample_rate_hz", fs},
                 {"seed", seed},
                 {"escape_time_s", traj.escape_time},
                 {"energy_ledger",
                  {{"bath_heat_j", traj.audit.bath_heat},
                   {"feedback_work_j", traj.audit.feedback_work},
                   {"drive_work_j", traj.audit.drive_work},
                   {"stray_work_j", traj.audit.stray_work},
                   {"rf_work_j", traj.audit.rf_work},
                   {"closure", traj.audit.closure()}}},
                 {"defaults_in_effect",
                  {{"geometric_efficiency", cfg.trap.geometric_efficiency_defaulted},
                   {"characteristic_distance", cfg.trap.characteristic_distance_defaulted}}},
                 {"manifest", "manifest.json"}};
    io::write_text(dir / "summary.json", summary.dump(2) + "\n");
    return summary;
}

inline int cmd_simulate(const SimulateArgs& args) {
    const fs::path dir = resolve_out_dir(args.out_dir);
    io::RunManifest manifest{"simulate", args.config_path, args.seed, dir.string()};
    manifest.write(dir);

    if (args.sweep.empty()) {
        const auto cfg = load_or_default(args.config_path);
        const auto summary = run_one_simulation(cfg, args, args.seed, dir);
        manifest.status = summary.at("status");
        manifest.write(dir);
        std::cout << "simulate: " << manifest.status << ", " << summary.at("n_samples")
                  << " samples -> " << (dir / "trajectory.bin").string() << "\n";
        return exit_ok;
    }

    // --sweep section.key=v1,v2,... fans out into per-run subdirectories
    const auto eq = args.sweep.find('=');
    if (eq == std::string::npos)
        throw parse_error("--sweep expects section.key=v1,v2,...");
    const std::string key = args.sweep.substr(0, eq);
    const auto values = parse_list(args.sweep.substr(eq + 1), "--sweep");
    std::map<std::string, std::string> kv;
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw parse_error("cannot open config file '" + args.config_path + "'");
        kv = parse_key_values(in);
    } else {
        std::istringstream in(serialize_config(default_config()));
        kv = parse_key_values(in);
    }
    std::string status = "ok";
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto kv_run = kv;
        kv_run[key] = io::fmt(values[i]);
        const auto cfg = config_from_key_values(kv_run);
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        const fs::path subdir = dir / name;
        fs::create_directories(subdir);
        io::RunManifest sub{"simulate", args.config_path, stream_seed(args.seed, i),
                            subdir.string()};
        sub.write(subdir);
        const auto summary = run_one_simulation(cfg, args, stream_seed(args.seed, i), subdir);
        sub.status = summary.at("status");
        sub.write(subdir);
        std::cout << name << " (" << key << " = " << values[i] << "): "
                  << std::string(sub.status) << "\n";
        if (sub.status != "ok") status = std::string(sub.status);
    }
    manifest.status = status;
    manifest.write(dir);
    return exit_ok;
}

// ---------------------------------------------------------------------------
// psd

struct PsdArgs {
    std::string config_path, traj_path, out_dir;
    std::string axis = "z";
    std::size_t segment = 1 << 18;
    double overlap = 0.5;
    bool raw = false; // skip transduction, use positions directly
    std::uint64_t noise_seed = 1;
    std::string fit_window; // "f_lo:f_hi" optional
};

inline int cmd_psd(const PsdArgs& args) {
    const fs::path dir = resolve_out_dir(args.out_dir);
    io::RunManifest manifest{"psd", args.config_path, args.noise_seed, dir.string()};
    manifest.write(dir);
    const auto cfg = load_or_default(args.config_path);
    const auto traj = io::read_trajectory_binary(args.traj_path);

    const Axis ax = axis_from_name(args.axis);
    VoltageTrace trace;
    if (args.raw) {
        trace = VoltageTrace{traj.sample_rate, traj.positions[int(ax)], args.axis};
    } else {
        trace = transduce(traj, cfg.detection, args.noise_seed)[int(ax)];
    }
    const auto psd = welch_psd(trace, std::min(args.segment, trace.samples.size()), args.overlap);
    io::write_psd_csv(dir / ("psd_" + args.axis + ".csv"), psd);
    json report{{"report", "psd"},
                {"axis", args.axis},
                {"resolution_bandwidth_hz", psd.resolution_bandwidth},
                {"n_averages", psd.n_averages},
                {"parseval_residual", psd.parseval_residual()},
                {"manifest", "manifest.json"}};
    if (!args.fit_window.empty()) {
        const auto colon = args.fit_window.find(':');
        if (colon == std::string::npos) throw parse_error("--fit expects f_lo:f_hi");
        const double f_lo = std::stod(args.fit_window.substr(0, colon));
        const double f_hi = std::stod(args.fit_window.substr(colon + 1));
        report["fit"] = io::lorentzian_fit_json(fit_lorentzian(psd, f_lo, f_hi));
    }
    io::write_text(dir / "psd_report.json", report.dump(2) + "\n");
    manifest.status = "ok";
    manifest.write(dir);
    std::cout << "psd: " << psd.frequencies.size() << " bins, RBW "
              << psd.resolution_bandwidth << " Hz -> " << (dir / ("psd_" + args.axis + ".csv"))
              << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// fit-qm

struct FitQmArgs {
    std::string config_path, scan_path, out_dir;
    bool synthetic = false;
    bool quick = false;
    double qm = 75.0;
    int points = 5;
    double snr_db = 30.0;
    double point_duration = 2.0;
    double qmax = 0.3;
    std::string model = "approx";
    std::uint64_t seed = 1;
};

inline int cmd_fit_qm(const FitQmArgs& args) {
    const fs::path dir = resolve_out_dir(args.out_dir);
    io::RunManifest manifest{"fit-qm", args.config_path, args.seed, dir.string()};
    manifest.write(dir);

    auto cfg = load_or_default(args.config_path);
    std::vector<QmScanPoint> points;
    if (args.synthetic) {
        cfg.particle.charge = args.qm * cfg.particle.mass;
        // amplitudes spanning up to q_z = qmax
        const double v_max = args.qmax / qz_of(args.qm, 1.0, cfg.trap);
        std::vector<double> amplitudes;
        for (int i = 1; i <= args.points; ++i)
            amplitudes.push_back(v_max * double(i) / double(args.points));
        SyntheticScanOptions opts;
        opts.quick = args.quick;
        opts.snr_db = args.snr_db;
        opts.point_duration = args.point_duration;
        points = synthesize_qm_scan(cfg, amplitudes, args.seed, opts);
    } else {
        if (args.scan_path.empty())
            throw parse_error("fit-qm needs --scan FILE or --synthetic");
        points = io::read_qm_scan_csv(args.scan_path);
    }
    io::write_qm_scan_csv(dir / "qm_scan.csv", points);

    const BetaMethod method = args.model == "exact" ? BetaMethod::exact : BetaMethod::approx;
    if (args.model != "exact" && args.model != "approx")
        throw parse_error("--model must be approx or exact");
    const auto fit = fit_charge_to_mass(points, cfg.trap, method);
    json report = io::qm_fit_json(fit);
    report["reference_c_per_kg"] = 75.0;
    if (args.synthetic) report["ground_truth_c_per_kg"] = args.qm;
    io::write_text(dir / "qm_fit.json", report.dump(2) + "\n");
    manifest.status = "ok";
    manifest.write(dir);
    print_vs_reference("Q/m (" + fit.model + ")", fit.charge_to_mass, "C/kg", 75.0);
    return exit_ok;
}

// ---------------------------------------------------------------------------
// fit-mass

struct FitMassArgs {
    std::string config_path, scan_path, out_dir;
    bool synthetic = false;
    bool quick = false;
    double radius = 91e-9;
    double density = constants::density_nanodiamond;
    std::string pressures = "1.6,2.85,5.06,9.0,16.0"; // Pa, one decade
    double snr_db = 30.0;
    double point_duration = 6.0;
    std::uint64_t seed = 1;
};

inline int cmd_fit_mass(const FitMassArgs& args) {
    const fs::path dir = resolve_out_dir(args.out_dir);
    io::RunManifest manifest{"fit-mass", args.config_path, args.seed, dir.string()};
    manifest.write(dir);

    auto cfg = load_or_default(args.config_path);
    std::vector<PressureScanPoint> points;
    if (args.synthetic) {
        const double qm = cfg.particle.charge_to_mass();
        cfg.particle = ParticleSpec::from_radius_density(args.radius, args.density,
                                                         1.0, cfg.particle.absorption_coefficient);
        cfg.particle.charge = qm * cfg.particle.mass;
        SyntheticScanOptions opts;
        opts.quick = args.quick;
        opts.snr_db = args.snr_db;
        opts.point_duration = args.point_duration;
        points = synthesize_pressure_scan(cfg, parse_list(args.pressures, "--pressures"),
                                          args.seed, opts);
    } else {
        if (args.scan_path.empty())
            throw parse_error("fit-mass needs --scan FILE or --synthetic");
        points = io::read_pressure_scan_csv(args.scan_path);
    }
    io::write_pressure_scan_csv(dir / "pressure_scan.csv", points);

    const auto fit = fit_radius(points, args.density, cfg.environment);
    json report = io::radius_fit_json(fit);
    report["reference_radius_m"] = 91e-9;
    report["reference_mass_kg"] = 9.6e-18;
    if (args.synthetic) report["ground_truth_radius_m"] = args.radius;
    io::write_text(dir / "radius_fit.json", report.dump(2) + "\n");
    manifest.status = "ok";
    manifest.write(dir);
    print_vs_reference("radius", fit.radius * 1e9, "nm", 91.0);
    print_vs_reference("mass", fit.mass, "kg", 9.6e-18);
    return exit_ok;
}

// ---------------------------------------------------------------------------
// cool

struct CoolArgs {
    std::string config_path, out_dir;
    std::string gains = "12";
    double cal_pressure_mbar = 1.62e-2;
    double cal_duration = 8.0;
    double min_duration = 1.0;
    double window_hz = 250.0;
    bool auto_center = true;
    std::uint64_t seed = 1;
};

inline int cmd_cool(const CoolArgs& args) {
    const fs::path dir = resolve_out_dir(args.out_dir);
    io::RunManifest manifest{"cool", args.config_path, args.seed, dir.string()};
    manifest.write(dir);

    auto cfg = load_or_default(args.config_path);
    const auto gains = parse_list(args.gains, "--gains");
    const int ax = int(cfg.feedback.target_axis);
    const auto mp = mathieu_parameters(cfg.particle, cfg.trap);
    const double f_mode =
        beta_exact(mp.a[ax], mp.q[ax]) * cfg.trap.drive_frequency / (4.0 * constants::pi);
    if (args.auto_center &&
        std::abs(cfg.feedback.center_frequency - f_mode) > 2.0 * cfg.feedback.filter_bandwidth)
        cfg.feedback.center_frequency = f_mode;

    const double fs = cfg.simulation.sample_rate > 0.0
                          ? cfg.simulation.sample_rate
                          : 50.0 * cfg.trap.drive_frequency / (2.0 * constants::pi);

    // calibration trace in thermal equilibrium at the calibration pressure
    Environment cal_env = cfg.environment;
    cal_env.pressure = 100.0 * args.cal_pressure_mbar;
    DriveSpec none;
    SimOptions cal_opts;
    cal_opts.record_velocities = false;
    const auto cal_traj = simulate(cfg.particle, cfg.trap, cal_env, none, args.cal_duration, fs,
                                   stream_seed(args.seed, 0xCA1), cal_opts);
    const auto cal_trace = transduce(cal_traj, cfg.detection, stream_seed(args.seed, 0xCA2))[ax];
    const auto cal_psd =
        welch_psd(cal_trace, detail::floor_pow2(std::min<std::size_t>(
                                 1 << 20, cal_trace.samples.size() / 4)));

    GainSweepOptions opts;
    opts.min_duration = args.min_duration;
    opts.window_half_width = args.window_hz;
    opts.sample_rate = fs;
    const auto points = gain_sweep(cfg.particle, cfg.trap, cfg.environment, cfg.detection,
                                   cfg.feedback, gains, cal_psd, cal_env.gas_temperature,
                                   args.seed, opts);

    json rows = json::array();
    std::ofstream csv(dir / "cooling.csv", std::ios::binary);
    csv << "# manifest: manifest.json\ngain,temperature_k,uncertainty_k,heating\n";
    double t_min = std::numeric_limits<double>::infinity();
    for (const auto& pt : points) {
        rows.push_back({{"gain", pt.gain},
                        {"temperature_k", pt.heating ? json(nullptr) : json(pt.temperature.temperature)},
                        {"uncertainty_k", pt.heating ? json(nullptr) : json(pt.temperature.uncertainty)},
                        {"predicted_gamma_fb_per_s", pt.predicted_gamma_fb},
                        {"gas_damping_per_s", pt.gas_damping},
                        {"heating", pt.heating}});
        csv << io::fmt(pt.gain) << ','
            << (pt.heating ? "nan" : io::fmt(pt.temperature.temperature)) << ','
            << (pt.heating ? "nan" : io::fmt(pt.temperature.uncertainty)) << ','
            << (pt.heating ? 1 : 0) << '\n';
        if (!pt.heating) t_min = std::min(t_min, pt.temperature.temperature);
    }
    json report{{"report", "cooling_gain_sweep"},
                {"mode", axis_name(cfg.feedback.target_axis)},
                {"mode_frequency_hz", f_mode},
                {"calibration_pressure_mbar", args.cal_pressure_mbar},
                {"points", rows},
                {"min_temperature_k", t_min},
                {"reference_min_temperature_k", 0.570},
                {"manifest", "manifest.json"}};
    io::write_text(dir / "cooling_report.json", report.dump(2) + "\n");
    const bool any_heating =
        std::any_of(points.begin(), points.end(), [](const auto& p) { return p.heating; });
    manifest.status = any_heating ? "heating" : "ok";
    manifest.write(dir);
    print_vs_reference("min mode temperature", t_min, "K", 0.570);
    return exit_ok;
}

// ---------------------------------------------------------------------------
// decohere

struct DecohereArgs {
    std::string out_dir, batch_path;
    bool dp = false, gas = false;
    double mass = 1e-15;
    double density = constants::density_bulk_diamond;
    double radius = 0.0; // dp: derived from density unless given; gas: required
    double separation = 2e-6;
    double pressure_mbar = 6e-8;
    double temperature = 300.0;
    double gas_mass = constants::mass_n2;
    double time = 100e-6;
    double budget = 1.0;
};

inline json dp_report(const DpQuery& q) {
    const double e_g = dp_self_energy(q);
    const double tau = dp_lifetime(q);
    return json{{"op", "dp_lifetime"},
                {"mass_kg", q.mass},
                {"radius_m", q.radius},
                {"separation_m", q.separation},
                {"overlap_factor", dp_overlap_factor(q.separation / (2.0 * q.radius))},
                {"self_energy_j", e_g},
                {"lifetime_s", std::isinf(tau) ? json(nullptr) : json(tau)},
                {"reference_lifetime_s", 0.6},
                {"provenance", "closed-form"}};
}

inline json gas_report(const DecohereArgs& args) {
    GasDecoherenceQuery q;
    q.pressure = 100.0 * args.pressure_mbar;
    q.radius = args.radius > 0.0 ? args.radius : 20e-9;
    q.gas_molecule_mass = args.gas_mass;
    q.environment_temperature = args.temperature;
    const double rate = gas_decoherence_rate(q);
    const double p_min =
        min_pressure(args.time, q.radius, q.gas_molecule_mass, q.environment_temperature,
                     args.budget);
    return json{{"op", "gas_decoherence"},
                {"pressure_pa", q.pressure},
                {"radius_m", q.radius},
                {"gas_molecule_mass_kg", q.gas_molecule_mass},
                {"environment_temperature_k", q.environment_temperature},
                {"rate_per_s", rate},
                {"rate_times_time", rate * args.time},
                {"interferometer_time_s", args.time},
                {"budget", args.budget},
                {"min_pressure_pa", p_min},
                {"min_pressure_mbar", p_min / 100.0},
                {"reference_min_pressure_mbar", 6e-8},
                {"provenance", "closed-form"}};
}

inline json batch_line_result(const json& in) {
    const std::string op = in.at("op");
    if (op == "gas_rate") {
        GasDecoherenceQuery q;
        q.pressure = in.at("pressure_pa").get<double>();
        q.radius = in.at("radius_m").get<double>();
        q.gas_molecule_mass = in.value("gas_molecule_mass_kg", constants::mass_n2);
        q.environment_temperature = in.value("environment_temperature_k", 300.0);
        return json{{"rate_per_s", gas_decoherence_rate(q)}, {"provenance", "closed-form"}};
    }
    if (op == "min_pressure") {
        return json{{"min_pressure_pa",
                     min_pressure(in.at("interferometer_time_s").get<double>(),
                                  in.at("radius_m").get<double>(),
                                  in.value("gas_molecule_mass_kg", constants::mass_n2),
                                  in.value("environment_temperature_k", 300.0),
                                  in.value("budget", 1.0))},
                    {"provenance", "closed-form"}};
    }
    if (op == "dp_lifetime") {
        DpQuery q;
        if (in.contains("radius_m")) {
            q.mass = in.at("mass_kg").get<double>();
            q.radius = in.at("radius_m").get<double>();
            q.separation = in.at("separation_m").get<double>();
        } else {
            q = DpQuery::from_density(in.at("mass_kg").get<double>(),
                                      in.value("density_kg_m3", constants::density_bulk_diamond),
                                      in.at("separation_m").get<double>());
        }
        const double tau = dp_lifetime(q);
        return json{{"self_energy_j", dp_self_energy(q)},
                    {"lifetime_s", std::isinf(tau) ? json(nullptr) : json(tau)},
                    {"provenance", "closed-form"}};
    }
    if (op == "heat_balance") {
        HeatBalanceAnchor anchor;
        HeatBalanceModel model;
        model.absorption_coefficient = in.value("absorption_per_m", 3.0);
        model.environment_temperature = in.value("environment_temperature_k", 300.0);
        model.radiative_constant = calibrate_radiative_constant(anchor);
        auto particle = ParticleSpec::from_radius_density(91e-9, constants::density_nanodiamond,
                                                          0.0, model.absorption_coefficient);
        return json{{"balance_temperature_k",
                     internal_temperature_balance(in.at("intensity_w_m2").get<double>(), particle,
                                                  model)},
                    {"provenance", heat_balance_provenance}};
    }
    throw parse_error("unknown batch op '" + op + "'");
}

inline int cmd_decohere(const DecohereArgs& args) {
    const fs::path dir = resolve_out_dir(args.out_dir);
    io::RunManifest manifest{"decohere", "", 0, dir.string()};
    manifest.write(dir);

    if (!args.batch_path.empty()) {
        std::ifstream in(args.batch_path);
        if (!in) throw parse_error("cannot open batch file '" + args.batch_path + "'");
        std::ofstream out(dir / "decohere_results.jsonl", std::ios::binary);
        std::string line;
        int n = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json query = json::parse(line);
            json row{{"input", query}, {"result", batch_line_result(query)}};
            out << row.dump() << "\n";
            ++n;
        }
        manifest.status = "ok";
        manifest.write(dir);
        std::cout << "decohere: " << n << " queries -> "
                  << (dir / "decohere_results.jsonl").string() << "\n";
        return exit_ok;
    }

    json report;
    if (args.dp) {
        const DpQuery q = args.radius > 0.0
                              ? DpQuery{args.mass, args.radius, args.separation}
                              : DpQuery::from_density(args.mass, args.density, args.separation);
        report = dp_report(q);
        io::write_text(dir / "decohere_report.json", report.dump(2) + "\n");
        const auto tau = report.at("lifetime_s");
        if (!tau.is_null())
            print_vs_reference("DP lifetime", tau.get<double>(), "s", 0.6);
        else
            std::cout << "DP lifetime = infinite (zero separation)\n";
    } else if (args.gas) {
        report = gas_report(args);
        io::write_text(dir / "decohere_report.json", report.dump(2) + "\n");
        print_vs_reference("min pressure", report.at("min_pressure_mbar").get<double>(), "mbar",
                           6e-8);
    } else {
        throw parse_error("decohere needs --dp, --gas or --batch FILE");
    }
    manifest.status = "ok";
    manifest.write(dir);
    return exit_ok;
}

// ---------------------------------------------------------------------------
// heat-balance

struct HeatBalanceArgs {
    std::string out_dir;
    std::string intensities_w_mm2 = "0.1,0.637,1,10,100,165,200";
    double alpha_per_cm = 0.03;
    double anchor_intensity_w_mm2 = 165.0;
    double anchor_alpha_per_cm = 0.03;
    double anchor_temperature = 500.0;
    double env_temperature = 300.0;
};

inline int cmd_heat_balance(const HeatBalanceArgs& args) {
    const fs::path dir = resolve_out_dir(args.out_dir);
    io::RunManifest manifest{"heat-balance", "", 0, dir.string()};
    manifest.write(dir);

    HeatBalanceAnchor anchor;
    anchor.intensity = args.anchor_intensity_w_mm2 * 1e6;
    anchor.absorption_coefficient = args.anchor_alpha_per_cm * 100.0;
    anchor.balance_temperature = args.anchor_temperature;
    anchor.environment_temperature = args.env_temperature;
    HeatBalanceModel model;
    model.absorption_coefficient = args.alpha_per_cm * 100.0;
    model.environment_temperature = args.env_temperature;
    model.radiative_constant = calibrate_radiative_constant(anchor);
    const auto particle = ParticleSpec::from_radius_density(
        91e-9, constants::density_nanodiamond, 0.0, model.absorption_coefficient);

    const auto intensities = parse_list(args.intensities_w_mm2, "--intensities");
    std::ofstream csv(dir / "heat_balance.csv", std::ios::binary);
    csv << "# manifest: manifest.json\nintensity_w_mm2,temperature_k\n";
    json rows = json::array();
    for (double i_mm2 : intensities) {
        const double t = internal_temperature_balance(i_mm2 * 1e6, particle, model);
        csv << io::fmt(i_mm2) << ',' << io::fmt(t) << '\n';
        rows.push_back({{"intensity_w_mm2", i_mm2}, {"temperature_k", t}});
    }
    const double t_anchor =
        internal_temperature_balance(args.anchor_intensity_w_mm2 * 1e6, particle, model);
    json report{{"report", "heat_balance"},
                {"absorption_per_cm", args.alpha_per_cm},
                {"radiative_constant_w_m3_k6", model.radiative_constant},
                {"points", rows},
                {"balance_at_anchor_k", t_anchor},
                {"reference_balance_k", 500.0},
                {"provenance", heat_balance_provenance},
                {"manifest", "manifest.json"}};
    io::write_text(dir / "heat_balance.json", report.dump(2) + "\n");
    manifest.status = "ok";
    manifest.write(dir);
    print_vs_reference("balance temperature at " + std::to_string(args.anchor_intensity_w_mm2) +
                           " W/mm^2",
                       t_anchor, "K", 500.0);
    return exit_ok;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"levitrap: end-cap trap simulation and analysis toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "integrate the trapped-particle dynamics");
    c_sim->add_option("--config", sim.config_path, "configuration file");
    c_sim->add_option("--duration", sim.duration, "simulated time [s]");
    c_sim->add_option("--sample-rate", sim.sample_rate, "sample rate [Hz]");
    c_sim->add_option("--seed", sim.seed, "RNG seed");
    c_sim->add_option("--out", sim.out_dir, "output directory");
    c_sim->add_flag("--csv", sim.csv, "also write trajectory.csv");
    c_sim->add_option("--tickler-axis", sim.tickler_axis, "tickler drive axis (x|y|z)");
    c_sim->add_option("--tickler-volt", sim.tickler_volt, "tickler amplitude [V]");
    c_sim->add_option("--tickler-freq", sim.tickler_freq, "tickler frequency [Hz]");
    c_sim->add_option("--sweep", sim.sweep, "fan out over section.key=v1,v2,...");

    PsdArgs psd;
    auto* c_psd = app.add_subcommand("psd", "spectral estimate of a trajectory");
    c_psd->add_option("--config", psd.config_path, "configuration file");
    c_psd->add_option("--traj", psd.traj_path, "trajectory.bin input")->required();
    c_psd->add_option("--axis", psd.axis, "axis (x|y|z)");
    c_psd->add_option("--segment", psd.segment, "Welch segment length");
    c_psd->add_option("--overlap", psd.overlap, "segment overlap fraction");
    c_psd->add_flag("--raw", psd.raw, "use raw positions instead of detector volts");
    c_psd->add_option("--noise-seed", psd.noise_seed, "detector noise seed");
    c_psd->add_option("--fit", psd.fit_window, "fit one resonance in f_lo:f_hi");
    c_psd->add_option("--out", psd.out_dir, "output directory");

    FitQmArgs qm;
    auto* c_qm = app.add_subcommand("fit-qm", "charge-to-mass from a drive-voltage scan");
    c_qm->add_option("--config", qm.config_path, "configuration file");
    c_qm->add_option("--scan", qm.scan_path, "scan CSV (v0_volt,omega_z_rad_s)");
    c_qm->add_flag("--synthetic", qm.synthetic, "generate the scan in-process");
    c_qm->add_flag("--quick", qm.quick, "synthetic: skip the simulation chain");
    c_qm->add_option("--qm", qm.qm, "synthetic ground-truth Q/m [C/kg]");
    c_qm->add_option("--points", qm.points, "synthetic scan points");
    c_qm->add_option("--snr-db", qm.snr_db, "synthetic detection SNR [dB]");
    c_qm->add_option("--point-duration", qm.point_duration, "synthetic seconds per point");
    c_qm->add_option("--qmax", qm.qmax, "synthetic maximum q_z");
    c_qm->add_option("--model", qm.model, "approx|exact");
    c_qm->add_option("--seed", qm.seed, "RNG seed");
    c_qm->add_option("--out", qm.out_dir, "output directory");

    FitMassArgs fm;
    auto* c_fm = app.add_subcommand("fit-mass", "radius/mass from a pressure scan");
    c_fm->add_option("--config", fm.config_path, "configuration file");
    c_fm->add_option("--scan", fm.scan_path, "scan CSV (pressure_pa,gamma_per_s)");
    c_fm->add_flag("--synthetic", fm.synthetic, "generate the scan in-process");
    c_fm->add_flag("--quick", fm.quick, "synthetic: skip the simulation chain");
    c_fm->add_option("--radius", fm.radius, "synthetic ground-truth radius [m]");
    c_fm->add_option("--density", fm.density, "assumed density [kg/m^3]");
    c_fm->add_option("--pressures", fm.pressures, "scan pressures [Pa], comma list");
    c_fm->add_option("--snr-db", fm.snr_db, "synthetic detection SNR [dB]");
    c_fm->add_option("--point-duration", fm.point_duration, "synthetic seconds per point");
    c_fm->add_option("--seed", fm.seed, "RNG seed");
    c_fm->add_option("--out", fm.out_dir, "output directory");

    CoolArgs cool;
    auto* c_cool = app.add_subcommand("cool", "closed-loop cooling gain sweep");
    c_cool->add_option("--config", cool.config_path, "configuration file");
    c_cool->add_option("--gains", cool.gains, "comma list of feedback gains");
    c_cool->add_option("--cal-pressure-mbar", cool.cal_pressure_mbar, "calibration pressure");
    c_cool->add_option("--cal-duration", cool.cal_duration, "calibration trace length [s]");
    c_cool->add_option("--min-duration", cool.min_duration, "per-gain duration floor [s]");
    c_cool->add_option("--window", cool.window_hz, "thermometry half-window [Hz]");
    c_cool->add_option("--seed", cool.seed, "RNG seed");
    c_cool->add_option("--out", cool.out_dir, "output directory");

    DecohereArgs dec;
    auto* c_dec = app.add_subcommand("decohere", "decoherence rate and budget calculators");
    c_dec->add_flag("--dp", dec.dp, "gravitational state-reduction lifetime");
    c_dec->add_flag("--gas", dec.gas, "gas-collision decoherence");
    c_dec->add_option("--batch", dec.batch_path, "JSON-lines query file");
    c_dec->add_option("--mass", dec.mass, "particle mass [kg]");
    c_dec->add_option("--density", dec.density, "density for radius derivation [kg/m^3]");
    c_dec->add_option("--radius", dec.radius, "particle radius [m]");
    c_dec->add_option("--sep", dec.separation, "superposition separation [m]");
    c_dec->add_option("--pressure-mbar", dec.pressure_mbar, "gas pressure [mbar]");
    c_dec->add_option("--temperature", dec.temperature, "environment temperature [K]");
    c_dec->add_option("--gas-mass", dec.gas_mass, "gas molecule mass [kg]");
    c_dec->add_option("--time", dec.time, "interferometer time [s]");
    c_dec->add_option("--budget", dec.budget, "allowed gamma*t");
    c_dec->add_option("--out", dec.out_dir, "output directory");

    HeatBalanceArgs hb;
    auto* c_hb = app.add_subcommand("heat-balance", "laser heating vs radiative cooling");
    c_hb->add_option("--intensities", hb.intensities_w_mm2, "comma list [W/mm^2]");
    c_hb->add_option("--alpha-per-cm", hb.alpha_per_cm, "absorption coefficient [1/cm]");
    c_hb->add_option("--anchor-intensity", hb.anchor_intensity_w_mm2, "anchor [W/mm^2]");
    c_hb->add_option("--anchor-alpha-per-cm", hb.anchor_alpha_per_cm, "anchor alpha [1/cm]");
    c_hb->add_option("--anchor-temperature", hb.anchor_temperature, "anchor balance T [K]");
    c_hb->add_option("--env-temperature", hb.env_temperature, "environment T [K]");
    c_hb->add_option("--out", hb.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return exit_validation;
    }

    try {
        if (c_sim->parsed()) return cmd_simulate(sim);
        if (c_psd->parsed()) return cmd_psd(psd);
        if (c_qm->parsed()) return cmd_fit_qm(qm);
        if (c_fm->parsed()) return cmd_fit_mass(fm);
        if (c_cool->parsed()) return cmd_cool(cool);
        if (c_dec->parsed()) return cmd_decohere(dec);
        if (c_hb->parsed()) return cmd_heat_balance(hb);
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const parse_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_validation;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numerical;
    }
    return exit_ok;
}

inline int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("levitrap");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(int(argv.size()), argv.data());
}

} // namespace levitrap::cli
