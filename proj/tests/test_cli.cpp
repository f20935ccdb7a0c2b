#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "config.hpp"
#include "twomem/constants.hpp"
#include "twomem/errors.hpp"
#include "twomem/gridfile.hpp"

using namespace twomem;
using namespace twomem::cli;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("twomem_cli_" + name);
    std::filesystem::remove_all(p);
    return p;
}

CommandOptions quiet(const std::filesystem::path& out, bool check = false) {
    CommandOptions o;
    o.out = out;
    o.workers = 2;
    o.check = check;
    return o;
}

int run(const std::string& command, const RunConfig& c, const CommandOptions& o) {
    std::ostringstream err;
    return dispatch(command, c, o, err);
}

std::vector<std::vector<double>> data_rows(const std::filesystem::path& p) { return read_table(p).rows; }

}  // namespace

TEST(Units, FrequenciesAndLengths) {
    RunConfig c;
    c.set("physical.gamma1 = 3 kHz");
    EXPECT_DOUBLE_EQ(c.frequency("physical.gamma1"), kTwoPi * 3e3);
    c.set("physical.gamma1", "42 rad/s");
    EXPECT_DOUBLE_EQ(c.frequency("physical.gamma1"), 42.0);
    c.set("physical.L", "9 mm");
    EXPECT_DOUBLE_EQ(c.length("physical.L"), 9e-3);
    c.set("physical.rho", "3.1 g/cm^3");
    EXPECT_DOUBLE_EQ(c.density("physical.rho"), 3100.0);
    c.set("drive.power", "250 uW");
    EXPECT_DOUBLE_EQ(c.power("drive.power"), 250e-6);
    c.set("placement.Q1", "0.25 lambda");
    EXPECT_DOUBLE_EQ(c.position("placement.Q1"), 0.25 * 1064e-9);
    c.set("placement.Q1", "-100 nm");
    EXPECT_DOUBLE_EQ(c.position("placement.Q1"), -100e-9);
    c.set("drive.detuning", "-1.5e2 Hz");
    EXPECT_DOUBLE_EQ(c.frequency("drive.detuning"), -kTwoPi * 150.0);
}

TEST(Units, AmbiguousValuesRejected) {
    RunConfig c;
    EXPECT_THROW(c.set("physical.gamma1", "3"), ConfigError);           // rate without unit
    EXPECT_THROW(c.set("physical.kappa_in", "50 kHz/s"), ConfigError);  // unknown unit
    EXPECT_THROW(c.set("drive.rate", "5e7 Hz"), ConfigError);           // amplitude rates are not frequencies
    EXPECT_THROW(c.set("physical.n", "2.17 m"), ConfigError);           // plain numbers take no unit
    EXPECT_THROW(c.set("noise.enabled", "yes"), ConfigError);
    EXPECT_THROW(c.set("integration.stride", "-3"), ConfigError);
    EXPECT_THROW(c.set("integration.tier", "third"), ConfigError);
    EXPECT_THROW(c.set("analysis.tiers", "full, full"), ConfigError);
    EXPECT_THROW(c.set("physical.gamma1", "none"), ConfigError);
    // a failed override leaves the old value in place
    EXPECT_DOUBLE_EQ(c.frequency("physical.gamma1"), kTwoPi * 1.0);
}

TEST(Config, UnknownKeysAndSections) {
    EXPECT_THROW(RunConfig::parse("[physical]\nomega3 = 1 Hz\n"), ConfigError);
    EXPECT_THROW(RunConfig::parse("[plasma]\nn = 1\n"), ConfigError);
    EXPECT_THROW(RunConfig::parse("n = 1\n"), ConfigError);
    EXPECT_THROW(RunConfig::parse("[physical]\nn = 2\nn = 3\n"), ConfigError);
    RunConfig c;
    EXPECT_THROW(c.set("physical.foo=1"), ConfigError);
    EXPECT_THROW(c.set("physical.n"), ConfigError);
    const auto ok = RunConfig::parse("; comment\n[physical]\nn = 2.5\n# another\n[drive]\ndetuning = 1 kHz\n");
    EXPECT_EQ(ok.number("physical.n"), 2.5);
}

TEST(Config, ResolvedFormRoundTrips) {
    RunConfig c;
    c.set("physical.L", "9 mm");
    c.set("ensemble.tiers", "first_order, full");
    std::string text;
    for (const auto& l : c.resolved_lines()) text += l + "\n";
    const auto back = RunConfig::parse(text);
    EXPECT_EQ(back.resolved_lines(), c.resolved_lines());
    EXPECT_EQ(provenance(back), provenance(c));
    // every schema key appears exactly once
    std::size_t keys = 0;
    for (const auto& l : c.resolved_lines()) keys += l.front() == '[' ? 0 : 1;
    EXPECT_EQ(keys, schema().size());
}

TEST(Config, DefaultsMatchReferenceSetup) {
    const auto p = physical_params(RunConfig{});
    const auto r = PhysicalParams::reference();
    EXPECT_NEAR(p.omega_bar(), r.omega_bar(), 1e-9 * r.omega_bar());
    EXPECT_NEAR(p.omega2 - p.omega1, r.omega2 - r.omega1, 1e-6);
    EXPECT_DOUBLE_EQ(p.gamma1, r.gamma1);
    EXPECT_DOUBLE_EQ(p.gamma2, r.gamma2);
    EXPECT_DOUBLE_EQ(p.kappa(), r.kappa());
    EXPECT_DOUBLE_EQ(p.L, r.L);
    EXPECT_DOUBLE_EQ(p.Lz, r.Lz);
    EXPECT_DOUBLE_EQ(p.mass1(), r.mass1());
    EXPECT_DOUBLE_EQ(p.reflectivity().R, r.reflectivity().R);
    const auto s = resolve_setup(RunConfig{});
    EXPECT_NEAR(s.couplings.Delta_prime, kTwoPi * 235.5e3, 1e-6);
    EXPECT_NEAR(s.Q1 / s.params.lambda, 0.562, 1e-15);
}

TEST(Config, DriveChoicesAreExclusive) {
    RunConfig c;
    c.set("drive.rate", "1e6 /s");
    EXPECT_THROW(resolve_setup(c), ConfigError);  // power still set
    c.set("drive.power", "none");
    EXPECT_DOUBLE_EQ(resolve_setup(c).drive.E, 1e6);
    c.set("drive.kind", "two_tone");
    EXPECT_THROW(resolve_setup(c), ConfigError);
    c.set("drive.rate1", "1 /s");
    EXPECT_THROW(resolve_setup(c), ConfigError);
    c.set("drive.rate2", "2 /s");
    const auto d = resolve_setup(c).drive;
    EXPECT_EQ(d.kind, DriveSpec::Kind::TwoTone);
    EXPECT_EQ(d.E2, 2.0);
    c.set("drive.sideband1", "10 Hz");
    c.set("drive.sideband2", "20 Hz");
    EXPECT_THROW(resolve_setup(c), ConfigError);
}

TEST(Config, LoadsEmbeddedConfigFromResults) {
    const auto dir = scratch("embedded");
    RunConfig c;
    c.set("analysis.grid", "8");
    c.set("physical.Lz", "50 nm");
    ASSERT_EQ(run("map", c, quiet(dir)), kOk);
    const auto back = RunConfig::load(dir / "map.csv");
    EXPECT_EQ(back.resolved_lines(), c.resolved_lines());
    ASSERT_EQ(run("map", back, quiet(dir / "again")), kOk);
    EXPECT_EQ(data_rows(dir / "map.csv"), data_rows(dir / "again" / "map.csv"));
    std::filesystem::remove_all(dir);
}

TEST(Commands, MapSummaryAndCheck) {
    const auto dir = scratch("map");
    RunConfig c;
    c.set("analysis.grid", "64");
    EXPECT_EQ(run("map", c, quiet(dir, true)), kOk);
    const auto t = read_table(dir / "map_summary.csv");
    const double union_fraction = t.rows[0][t.column("fraction_union")];
    EXPECT_NEAR(union_fraction, 0.265, 0.02);
    EXPECT_GT(t.rows[0][t.column("max_g1")], 1.0);
    c.set("analysis.check_union", "0.9");
    EXPECT_EQ(run("map", c, quiet(dir, true)), kCheckFailed);
    EXPECT_EQ(run("map", c, quiet(dir, false)), kOk);
    std::filesystem::remove_all(dir);
}

TEST(Commands, MapResolutionConvergence) {
    const auto dir = scratch("grid");
    RunConfig c;
    c.set("analysis.grid", "64");
    ASSERT_EQ(run("map", c, quiet(dir / "a")), kOk);
    c.set("analysis.grid", "256");
    ASSERT_EQ(run("map", c, quiet(dir / "b")), kOk);
    const auto a = read_table(dir / "a" / "map_summary.csv"), b = read_table(dir / "b" / "map_summary.csv");
    EXPECT_LT(std::abs(a.rows[0][a.column("fraction_union")] - b.rows[0][b.column("fraction_union")]), 0.01);
    std::filesystem::remove_all(dir);
}

TEST(Commands, ZeroReflectivityMap) {
    const auto dir = scratch("flat");
    RunConfig c;
    c.set("analysis.grid", "16");
    c.set("physical.reflectivity", "0");
    ASSERT_EQ(run("map", c, quiet(dir)), kOk);
    const auto t = read_table(dir / "map.csv");
    for (const auto& row : t.rows)
        for (const char* col : {"g1", "g2", "g12", "g22", "gt", "mask_union"}) EXPECT_EQ(row[t.column(col)], 0.0);
    const auto s = read_table(dir / "map_summary.csv");
    EXPECT_EQ(s.rows[0][s.column("fraction_union")], 0.0);
    std::filesystem::remove_all(dir);
}

TEST(Commands, DampedOscillatorEnvelope) {
    const auto dir = scratch("damped");
    RunConfig c;
    c.set("drive.power", "0 W");
    c.set("physical.gamma1", "2 kHz");
    c.set("integration.ordering", "0");
    c.set("integration.tau_end", "200");
    c.set("integration.stride", "5");
    c.set("integration.initial_q1", "100");
    c.set("analysis.tau_start", "50");
    c.set("analysis.tau_window", "100");
    ASSERT_EQ(run("trajectory", c, quiet(dir, true)), kOk);
    const auto t = read_table(dir / "envelope.csv");
    const auto tc = t.column("t"), ac = t.column("abs_A1");
    // least-squares slope of log|A1| once the smoothing windows are full
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t i = t.rows.size() / 3; i < t.rows.size(); ++i) {
        const double x = t.rows[i][tc], y = std::log(t.rows[i][ac]);
        sx += x, sy += y, sxx += x * x, sxy += x * y, n += 1;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(slope / (-0.5 * kTwoPi * 2e3), 1.0, 1e-3);
    std::filesystem::remove_all(dir);
}

TEST(Commands, NumericalAbortAndConfigErrors) {
    const auto dir = scratch("abort");
    RunConfig c;
    c.set("integration.dtau", "5");
    c.set("integration.stride", "1");
    c.set("integration.tau_end", "1e6");
    c.set("analysis.envelope", "false");
    EXPECT_EQ(run("trajectory", c, quiet(dir)), kNumericalAbort);
    RunConfig coarse;
    coarse.set("integration.stride", "1000");
    EXPECT_EQ(run("trajectory", coarse, quiet(dir)), kConfigError);
    RunConfig bad;
    bad.set("placement.Q1", "0.562 lambda");
    bad.set("physical.reflectivity", "1.5");
    EXPECT_EQ(run("map", bad, quiet(dir)), kConfigError);
    EXPECT_EQ(run("frobnicate", RunConfig{}, quiet(dir)), kConfigError);
    std::filesystem::remove_all(dir);
}

TEST(Commands, ZeroDriveEntanglement) {
    const auto dir = scratch("zero");
    RunConfig c;
    c.set("drive.power", "0 W");
    c.set("ensemble.realizations", "2000");
    c.set("ensemble.shard_size", "2000");
    c.set("ensemble.tau_end", "20");
    c.set("ensemble.sample_every", "10");
    c.set("ensemble.dtau", "0.02");
    c.set("ensemble.histograms", "none");
    ASSERT_EQ(run("entangle", c, quiet(dir)), kOk);
    for (const auto& row : data_rows(dir / "meanfield.csv")) EXPECT_EQ(row[2], 0.0);
    // the sample estimate of a product state only fluctuates around the bound
    for (const auto& row : data_rows(dir / "entangle_first_order.csv")) EXPECT_LT(row[2], 0.05);
    std::filesystem::remove_all(dir);
}

TEST(Commands, MeanfieldAndEnsembleFiles) {
    const auto dir = scratch("fig");
    RunConfig c;
    c.set("physical.omega1", "235 kHz");
    c.set("physical.omega2", "258.5 kHz");
    c.set("physical.L", "9 mm");
    c.set("placement.Q1", "-0.09 lambda");
    c.set("placement.Q2", "0.09 lambda");
    c.set("drive.kind", "two_tone");
    c.set("drive.detuning", "0 Hz");
    c.set("drive.power", "none");
    c.set("drive.sideband1", "12163.6 rad/s");
    c.set("drive.sideband2", "45180.3 rad/s");
    c.set("integration.dtau", "0.01");
    c.set("integration.tau_end", "100");
    c.set("integration.stride", "1000");
    ASSERT_EQ(run("meanfield", c, quiet(dir, true)), kOk);
    const auto mf = read_table(dir / "meanfield.csv");
    ASSERT_EQ(mf.rows.size(), 11u);
    EXPECT_GT(mf.rows.back()[mf.column("En")], 0.0);
    EXPECT_EQ(mf.rows.back()[mf.column("C_q1_p2")], mf.rows.back()[mf.column("C_q1_p2")]);

    c.set("ensemble.realizations", "64");
    c.set("ensemble.shard_size", "32");
    c.set("ensemble.tau_end", "40");
    c.set("ensemble.sample_every", "20");
    c.set("ensemble.checkpoint", "run.ckpt");
    ASSERT_EQ(run("entangle", c, quiet(dir / "e")), kOk);
    const auto e = read_table(dir / "e" / "entangle_first_order.csv");
    EXPECT_EQ(e.rows.size(), 3u);
    EXPECT_EQ(*e.header.find("N"), "64");
    EXPECT_TRUE(std::filesystem::exists(dir / "e" / "hist_first_order_epr_plus.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "e" / "error_first_order.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "e" / "run.ckpt.first_order"));
    // resuming a finished checkpoint reproduces the same numbers
    c.set("ensemble.resume", "true");
    ASSERT_EQ(run("entangle", c, quiet(dir / "e")), kOk);
    EXPECT_EQ(read_table(dir / "e" / "entangle_first_order.csv").rows, e.rows);
    std::filesystem::remove_all(dir);
}

TEST(Tool, ExitCodes) {
    const std::string tool = TWOMEM_TOOL_PATH;
    const auto dir = scratch("tool");
    auto code = [&](const std::string& args) {
        const int status = std::system((tool + " " + args + " > /dev/null 2>&1").c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    EXPECT_EQ(code("--help"), 0);
    EXPECT_EQ(code(""), 2);
    EXPECT_EQ(code("map --set physical.gamma1=3"), 2);
    EXPECT_EQ(code("map --config /nonexistent.ini"), 2);
    EXPECT_EQ(code("map --set analysis.grid=8 --check --out " + dir.string()), 0);
    EXPECT_EQ(code("map --set analysis.grid=8 --set analysis.check_union=0.9 --check --out " + dir.string()), 4);
    EXPECT_EQ(code("map --set analysis.grid=8 --seed 5 --out " + dir.string()), 0);
    const auto cfg = RunConfig::load(dir / "map.csv");
    EXPECT_EQ(cfg.count("noise.seed"), 5u);
    std::filesystem::remove_all(dir);
}
