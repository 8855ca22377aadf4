#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "levitrap/characterize.hpp"
#include "levitrap/dynamics.hpp"
#include "levitrap/feedback.hpp"
#include "levitrap/signal.hpp"

// File formats: a self-describing binary trajectory container, CSV exports
// for plotting, and JSON reports. Numeric CSV columns print with %.17g so a
// reread (or a rerun with the same seed) is byte-identical.
namespace levitrap {

inline constexpr const char* tool_version = "0.1.0";

namespace io {

using nlohmann::json;

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw parse_error("cannot open '" + path.string() + "' for writing");
    out << text;
}

inline json trajectory_header(const SimTrajectory& traj) {
    const bool has_vel = !traj.velocities[0].empty();
    json fields = json::array();
    for (const char* name : {"x", "y", "z"})
        fields.push_back({{"name", name}, {"unit", "m"}});
    if (has_vel)
        for (const char* name : {"vx", "vy", "vz"})
            fields.push_back({{"name", name}, {"unit", "m/s"}});
    return json{{"format", "levitrap-trajectory"},
                {"version", 1},
                {"sample_rate_hz", traj.sample_rate},
                {"seed", traj.rng_seed},
                {"n_samples", traj.size()},
                {"escaped", traj.escaped},
                {"escape_time_s", traj.escape_time},
                {"fields", fields}};
}

/// Binary layout: magic "LTRJ1\n", uint64 header length, JSON header,
/// then raw little-endian float64 columns in field order.
inline void write_trajectory_binary(const std::filesystem::path& path,
                                    const SimTrajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw parse_error("cannot open '" + path.string() + "' for writing");
    const std::string header = trajectory_header(traj).dump();
    const std::uint64_t len = header.size();
    out.write("LTRJ1\n", 6);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(header.data(), std::streamsize(len));
    auto write_col = [&out](const std::vector<double>& col) {
        out.write(reinterpret_cast<const char*>(col.data()),
                  std::streamsize(col.size() * sizeof(double)));
    };
    for (const auto& col : traj.positions) write_col(col);
    if (!traj.velocities[0].empty())
        for (const auto& col : traj.velocities) write_col(col);
}

inline SimTrajectory read_trajectory_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open trajectory file '" + path.string() + "'");
    char magic[6];
    in.read(magic, 6);
    if (!in || std::string(magic, 6) != "LTRJ1\n")
        throw parse_error("'" + path.string() + "' is not a levitrap trajectory file");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string header(len, '\0');
    in.read(header.data(), std::streamsize(len));
    json h = json::parse(header);
    SimTrajectory traj;
    traj.sample_rate = h.at("sample_rate_hz").get<double>();
    traj.rng_seed = h.at("seed").get<std::uint64_t>();
    traj.escaped = h.at("escaped").get<bool>();
    traj.escape_time = h.at("escape_time_s").get<double>();
    const std::size_t n = h.at("n_samples").get<std::size_t>();
    const bool has_vel = h.at("fields").size() == 6;
    auto read_col = [&in, n, &path](std::vector<double>& col) {
        col.resize(n);
        in.read(reinterpret_cast<char*>(col.data()), std::streamsize(n * sizeof(double)));
        if (!in) throw parse_error("truncated trajectory file '" + path.string() + "'");
    };
    for (auto& col : traj.positions) read_col(col);
    if (has_vel)
        for (auto& col : traj.velocities) read_col(col);
    return traj;
}

inline void write_trajectory_csv(const std::filesystem::path& path, const SimTrajectory& traj,
                                 const std::string& manifest_ref = "manifest.json") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw parse_error("cannot open '" + path.string() + "' for writing");
    const bool has_vel = !traj.velocities[0].empty();
    out << "# manifest: " << manifest_ref << "\n";
    out << (has_vel ? "t,x,y,z,vx,vy,vz\n" : "t,x,y,z\n");
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out << fmt(traj.time(i)) << ',' << fmt(traj.positions[0][i]) << ','
            << fmt(traj.positions[1][i]) << ',' << fmt(traj.positions[2][i]);
        if (has_vel)
            out << ',' << fmt(traj.velocities[0][i]) << ',' << fmt(traj.velocities[1][i]) << ','
                << fmt(traj.velocities[2][i]);
        out << '\n';
    }
}

inline void write_psd_csv(const std::filesystem::path& path, const Psd& psd,
                          const std::string& manifest_ref = "manifest.json") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw parse_error("cannot open '" + path.string() + "' for writing");
    out << "# manifest: " << manifest_ref << "\n";
    out << "frequency_hz,psd_v2_per_hz\n";
    for (std::size_t i = 0; i < psd.frequencies.size(); ++i)
        out << fmt(psd.frequencies[i]) << ',' << fmt(psd.values[i]) << '\n';
}

inline void write_qm_scan_csv(const std::filesystem::path& path,
                              const std::vector<QmScanPoint>& points,
                              const std::string& manifest_ref = "manifest.json") {
    std::ofstream out(path, std::ios::binary);
    out << "# manifest: " << manifest_ref << "\n";
    out << "v0_volt,omega_z_rad_s\n";
    for (const auto& pt : points) out << fmt(pt.drive_amplitude) << ',' << fmt(pt.omega_z) << '\n';
}

inline std::vector<QmScanPoint> read_qm_scan_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open scan file '" + path.string() + "'");
    std::vector<QmScanPoint> pts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'v') continue;
        QmScanPoint pt;
        if (std::sscanf(line.c_str(), "%lf,%lf", &pt.drive_amplitude, &pt.omega_z) != 2)
            throw parse_error("bad scan line: '" + line + "'");
        pts.push_back(pt);
    }
    return pts;
}

inline void write_pressure_scan_csv(const std::filesystem::path& path,
                                    const std::vector<PressureScanPoint>& points,
                                    const std::string& manifest_ref = "manifest.json") {
    std::ofstream out(path, std::ios::binary);
    out << "# manifest: " << manifest_ref << "\n";
    out << "pressure_pa,gamma_per_s\n";
    for (const auto& pt : points) out << fmt(pt.pressure) << ',' << fmt(pt.gamma) << '\n';
}

inline std::vector<PressureScanPoint> read_pressure_scan_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open scan file '" + path.string() + "'");
    std::vector<PressureScanPoint> pts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'p') continue;
        PressureScanPoint pt;
        if (std::sscanf(line.c_str(), "%lf,%lf", &pt.pressure, &pt.gamma) != 2)
            throw parse_error("bad scan line: '" + line + "'");
        pts.push_back(pt);
    }
    return pts;
}

inline json qm_fit_json(const QmFit& fit) {
    json points = json::array();
    for (const auto& pt : fit.scan_points)
        points.push_back({{"v0_volt", pt.drive_amplitude}, {"omega_z_rad_s", pt.omega_z}});
    return json{{"report", "charge_to_mass_fit"},
                {"model", fit.model},
                {"charge_to_mass_c_per_kg", fit.charge_to_mass},
                {"standard_error_c_per_kg", fit.standard_error},
                {"scan_points", points},
                {"manifest", "manifest.json"}};
}

inline json radius_fit_json(const RadiusFit& fit) {
    json points = json::array();
    for (const auto& pt : fit.scan_points)
        points.push_back({{"pressure_pa", pt.pressure}, {"gamma_per_s", pt.gamma}});
    return json{{"report", "radius_fit"},
                {"slope_per_s_pa", fit.slope},
                {"slope_error_per_s_pa", fit.slope_error},
                {"intercept_per_s", fit.intercept},
                {"radius_m", fit.radius},
                {"mass_kg", fit.mass},
                {"assumed_density_kg_m3", fit.assumed_density},
                {"standard_error_reliable", fit.standard_error_reliable},
                {"scan_points", points},
                {"manifest", "manifest.json"}};
}

inline json lorentzian_fit_json(const LorentzianFit& fit) {
    return json{{"model", fit.model},
                {"center_frequency_hz", fit.center_frequency},
                {"center_frequency_err_hz", fit.center_frequency_err},
                {"linewidth_hz", fit.linewidth},
                {"linewidth_err_hz", fit.linewidth_err},
                {"area_v2", fit.area},
                {"area_err_v2", fit.area_err},
                {"numeric_area_v2", fit.numeric_area},
                {"offset_v2_per_hz", fit.offset}};
}

struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t master_seed = 0;
    std::string output_directory;
    std::string status = "started"; // updated to ok/escaped/heating on completion

    json to_json() const {
        return json{{"command", command},
                    {"config", config_path},
                    {"master_seed", master_seed},
                    {"output_directory", output_directory},
                    {"tool_version", tool_version},
                    {"timestamp", timestamp()},
                    {"status", status}};
    }

    /// Written before any other output; rewritten with the final status.
    void write(const std::filesystem::path& dir) const {
        write_text(dir / "manifest.json", to_json().dump(2) + "\n");
    }

    static std::string timestamp() {
        std::time_t t = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        return buf;
    }
};

} // namespace io
} // namespace levitrap
