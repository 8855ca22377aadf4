#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "levitrap/cli.hpp"

using namespace levitrap;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "levitrap_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

const char* kStableConfig = "particle.radius = 91e-9\n"
                            "particle.density = 3040\n"
                            "particle.charge_to_mass = 75\n"
                            "trap.drive_frequency_khz = 25\n"
                            "trap.drive_amplitude = 5\n"
                            "trap.radial_asymmetry = 0.05\n"
                            "trap.electrode_coupling = 1.7e-16\n"
                            "environment.pressure = 1\n"
                            "detection.conversion = 2e4\n";

// drive amplitude pushed past the stability bound, no gas damping
const char* kEscapeConfig = "particle.radius = 91e-9\n"
                            "particle.density = 3040\n"
                            "particle.charge_to_mass = 75\n"
                            "trap.drive_frequency_khz = 25\n"
                            "trap.drive_amplitude = 24.5\n"
                            "environment.pressure = 0\n";

} // namespace

TEST_CASE("simulate: stable run writes manifest, summary and trajectory") {
    const auto dir = fresh_dir("sim_ok");
    const auto cfg = dir / "trap.cfg";
    write_file(cfg, kStableConfig);
    const int rc = cli::run_cli({"simulate", "--config", cfg.string(), "--duration", "0.02",
                                 "--seed", "7", "--out", dir.string(), "--csv"});
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "trajectory.bin"));
    CHECK(fs::exists(dir / "trajectory.csv"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("status") == "ok");
    CHECK(manifest.at("command") == "simulate");
    CHECK(manifest.at("tool_version") == tool_version);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("status") == "ok");
    CHECK(summary.at("energy_ledger").at("closure").get<double>() < 0.02);
}

TEST_CASE("simulate: unstable config exits 0 with escaped status in the manifest") {
    const auto dir = fresh_dir("sim_escape");
    const auto cfg = dir / "trap.cfg";
    write_file(cfg, kEscapeConfig);
    const int rc = cli::run_cli({"simulate", "--config", cfg.string(), "--duration", "0.05",
                                 "--seed", "3", "--out", dir.string()});
    CHECK(rc == 0);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("status") == "escaped");
}

TEST_CASE("simulate: missing config file is a validation failure (exit 2)") {
    const auto dir = fresh_dir("sim_missing");
    CHECK(cli::run_cli({"simulate", "--config", (dir / "nope.cfg").string(), "--out",
                        dir.string()}) == 2);
    // malformed flag handled by the parser
    CHECK(cli::run_cli({"simulate", "--definitely-not-a-flag"}) == 2);
    // config that violates an invariant
    const auto cfg = dir / "bad.cfg";
    write_file(cfg, std::string(kStableConfig) + "trap.geometric_efficiency = 1.5\n");
    CHECK(cli::run_cli({"simulate", "--config", cfg.string(), "--out", dir.string()}) == 2);
}

TEST_CASE("numerical failures exit 3") {
    const auto dir = fresh_dir("numerical");
    // ground-truth scan point beyond the stability region: the exponent solver
    // cannot converge there
    CHECK(cli::run_cli({"fit-qm", "--synthetic", "--quick", "--qmax", "0.95", "--out",
                        dir.string()}) == 3);
}

TEST_CASE("determinism: identical seeds give byte-identical numeric outputs") {
    const auto dir_a = fresh_dir("det_a");
    const auto dir_b = fresh_dir("det_b");
    const auto cfg = dir_a / "trap.cfg";
    write_file(cfg, kStableConfig);
    for (const auto& dir : {dir_a, dir_b}) {
        CHECK(cli::run_cli({"simulate", "--config", cfg.string(), "--duration", "0.02", "--seed",
                            "11", "--out", dir.string(), "--csv"}) == 0);
        CHECK(cli::run_cli({"psd", "--config", cfg.string(), "--traj",
                            (dir / "trajectory.bin").string(), "--axis", "z", "--segment", "8192",
                            "--noise-seed", "4", "--out", dir.string()}) == 0);
    }
    CHECK(slurp(dir_a / "trajectory.bin") == slurp(dir_b / "trajectory.bin"));
    CHECK(slurp(dir_a / "trajectory.csv") == slurp(dir_b / "trajectory.csv"));
    CHECK(slurp(dir_a / "psd_z.csv") == slurp(dir_b / "psd_z.csv"));
    CHECK(slurp(dir_a / "summary.json") == slurp(dir_b / "summary.json"));

    // a different seed changes the data
    const auto dir_c = fresh_dir("det_c");
    CHECK(cli::run_cli({"simulate", "--config", cfg.string(), "--duration", "0.02", "--seed",
                        "12", "--out", dir_c.string(), "--csv"}) == 0);
    CHECK(slurp(dir_a / "trajectory.csv") != slurp(dir_c / "trajectory.csv"));
}

TEST_CASE("trajectory binary round-trips through the reader") {
    const auto dir = fresh_dir("roundtrip");
    const auto cfg = dir / "trap.cfg";
    write_file(cfg, kStableConfig);
    CHECK(cli::run_cli({"simulate", "--config", cfg.string(), "--duration", "0.01", "--seed",
                        "2", "--out", dir.string()}) == 0);
    const auto traj = io::read_trajectory_binary(dir / "trajectory.bin");
    CHECK(traj.size() > 10000);
    CHECK(traj.sample_rate == doctest::Approx(1.25e6));
    CHECK(traj.rng_seed == 2);
    CHECK_FALSE(traj.escaped);
    CHECK(traj.velocities[0].size() == traj.size());
    // reread equals rewritten
    const auto copy = dir / "copy.bin";
    io::write_trajectory_binary(copy, traj);
    CHECK(slurp(dir / "trajectory.bin") == slurp(copy));
}

TEST_CASE("fit-qm --synthetic --quick recovers the ground truth") {
    const auto dir = fresh_dir("fitqm");
    CHECK(cli::run_cli({"fit-qm", "--synthetic", "--quick", "--qm", "45", "--seed", "9", "--out",
                        dir.string()}) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "qm_fit.json"));
    CHECK(report.at("charge_to_mass_c_per_kg").get<double>() == doctest::Approx(45.0).epsilon(0.02));
    CHECK(report.at("reference_c_per_kg").get<double>() == 75.0);
    CHECK(fs::exists(dir / "qm_scan.csv"));

    // the scan CSV feeds back through --scan
    const auto dir2 = fresh_dir("fitqm2");
    CHECK(cli::run_cli({"fit-qm", "--scan", (dir / "qm_scan.csv").string(), "--model", "exact",
                        "--out", dir2.string()}) == 0);
    const auto report2 = nlohmann::json::parse(slurp(dir2 / "qm_fit.json"));
    CHECK(report2.at("charge_to_mass_c_per_kg").get<double>() ==
          doctest::Approx(45.0).epsilon(0.02));
    CHECK(report2.at("model") == "exact");
}

TEST_CASE("fit-mass --synthetic --quick recovers radius and mass") {
    const auto dir = fresh_dir("fitmass");
    CHECK(cli::run_cli({"fit-mass", "--synthetic", "--quick", "--radius", "75e-9", "--seed", "4",
                        "--out", dir.string()}) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "radius_fit.json"));
    CHECK(report.at("radius_m").get<double>() == doctest::Approx(75e-9).epsilon(0.01));
    CHECK(fs::exists(dir / "pressure_scan.csv"));
}

TEST_CASE("decohere --dp writes the benchmark report") {
    const auto dir = fresh_dir("dp");
    CHECK(cli::run_cli({"decohere", "--dp", "--mass", "1e-15", "--sep", "2e-6", "--out",
                        dir.string()}) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "decohere_report.json"));
    CHECK(report.at("lifetime_s").get<double>() == doctest::Approx(0.6484).epsilon(1e-3));
    CHECK(report.at("provenance") == "closed-form");
}

TEST_CASE("decohere --batch processes JSON lines with input echo") {
    const auto dir = fresh_dir("batch");
    const auto in = dir / "queries.jsonl";
    write_file(in,
               R"({"op":"gas_rate","pressure_pa":6e-6,"radius_m":2e-8})"
               "\n"
               R"({"op":"min_pressure","interferometer_time_s":1e-4,"radius_m":2e-8})"
               "\n"
               R"({"op":"dp_lifetime","mass_kg":1e-15,"separation_m":2e-6,"density_kg_m3":3500})"
               "\n"
               R"({"op":"heat_balance","intensity_w_m2":1.65e8})"
               "\n");
    CHECK(cli::run_cli({"decohere", "--batch", in.string(), "--out", dir.string()}) == 0);
    std::ifstream results(dir / "decohere_results.jsonl");
    std::string line;
    std::vector<nlohmann::json> rows;
    while (std::getline(results, line))
        if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].at("result").at("rate_per_s").get<double>() ==
          doctest::Approx(7263.0).epsilon(1e-3));
    CHECK(rows[0].at("input").at("op") == "gas_rate");
    CHECK(rows[1].at("result").at("min_pressure_pa").get<double>() ==
          doctest::Approx(8.26e-6).epsilon(1e-2));
    CHECK(rows[2].at("result").at("lifetime_s").get<double>() ==
          doctest::Approx(0.6484).epsilon(1e-3));
    CHECK(rows[3].at("result").at("balance_temperature_k").get<double>() ==
          doctest::Approx(500.0).epsilon(1e-6));
    CHECK(rows[3].at("result").at("provenance") == "calibrated-model");
}

TEST_CASE("heat-balance writes monotone plot data") {
    const auto dir = fresh_dir("hb");
    CHECK(cli::run_cli({"heat-balance", "--out", dir.string()}) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "heat_balance.json"));
    CHECK(report.at("balance_at_anchor_k").get<double>() == doctest::Approx(500.0).epsilon(1e-9));
    double prev = 0.0;
    for (const auto& row : report.at("points")) {
        const double t = row.at("temperature_k").get<double>();
        CHECK(t > prev);
        prev = t;
    }
    CHECK(fs::exists(dir / "heat_balance.csv"));
}

TEST_CASE("simulate --sweep fans out per-value runs with derived seeds") {
    const auto dir = fresh_dir("sweep");
    const auto cfg = dir / "trap.cfg";
    write_file(cfg, kStableConfig);
    CHECK(cli::run_cli({"simulate", "--config", cfg.string(), "--duration", "0.01", "--seed",
                        "5", "--out", dir.string(), "--sweep",
                        "environment.pressure=0.5,2.0"}) == 0);
    CHECK(fs::exists(dir / "run_000" / "trajectory.bin"));
    CHECK(fs::exists(dir / "run_001" / "trajectory.bin"));
    const auto m0 = nlohmann::json::parse(slurp(dir / "run_000" / "manifest.json"));
    const auto m1 = nlohmann::json::parse(slurp(dir / "run_001" / "manifest.json"));
    CHECK(m0.at("master_seed").get<std::uint64_t>() != m1.at("master_seed").get<std::uint64_t>());
    CHECK(slurp(dir / "run_000" / "trajectory.bin") != slurp(dir / "run_001" / "trajectory.bin"));
}

TEST_CASE("simulate with a tickler drive feeds the energy ledger") {
    const auto dir = fresh_dir("tickler");
    const auto cfg = dir / "trap.cfg";
    write_file(cfg, kStableConfig);
    CHECK(cli::run_cli({"simulate", "--config", cfg.string(), "--duration", "0.02", "--seed",
                        "6", "--out", dir.string(), "--tickler-axis", "y", "--tickler-volt",
                        "10", "--tickler-freq", "870"}) == 0);
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("energy_ledger").at("drive_work_j").get<double>() != 0.0);
    CHECK(summary.at("energy_ledger").at("closure").get<double>() < 0.02);
}

TEST_CASE("psd --raw and --fit operate on positions directly") {
    const auto dir = fresh_dir("psdraw");
    const auto cfg = dir / "trap.cfg";
    write_file(cfg, kStableConfig);
    REQUIRE(cli::run_cli({"simulate", "--config", cfg.string(), "--duration", "2.0", "--seed",
                          "8", "--out", dir.string()}) == 0);
    CHECK(cli::run_cli({"psd", "--config", cfg.string(), "--traj",
                        (dir / "trajectory.bin").string(), "--axis", "z", "--segment", "262144",
                        "--raw", "--fit", "1500:2100", "--out", dir.string()}) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "psd_report.json"));
    CHECK(report.at("parseval_residual").get<double>() < 0.02);
    // axial mode of the stable config sits near 1.74 kHz
    CHECK(report.at("fit").at("center_frequency_hz").get<double>() ==
          doctest::Approx(1740.0).epsilon(0.02));
}

TEST_CASE("cool runs a small gain sweep end to end") {
    const auto dir = fresh_dir("cool");
    const int rc = cli::run_cli({"cool", "--gains", "0.5,1", "--cal-duration", "3",
                                 "--min-duration", "0.5", "--seed", "5", "--out", dir.string()});
    CHECK(rc == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "cooling_report.json"));
    REQUIRE(report.at("points").size() == 2);
    const double t0 = report.at("points")[0].at("temperature_k").get<double>();
    const double t1 = report.at("points")[1].at("temperature_k").get<double>();
    CHECK(t1 < t0);
    CHECK(t1 < 300.0);
    CHECK(report.at("min_temperature_k").get<double>() == doctest::Approx(t1));
    CHECK(fs::exists(dir / "cooling.csv"));
}

TEST_CASE("LEVITRAP_OUT provides the default output directory") {
    const auto dir = fresh_dir("envdir");
    setenv("LEVITRAP_OUT", dir.c_str(), 1);
    CHECK(cli::run_cli({"decohere", "--dp", "--mass", "1e-15", "--sep", "2e-6"}) == 0);
    unsetenv("LEVITRAP_OUT");
    CHECK(fs::exists(dir / "decohere_report.json"));
}
