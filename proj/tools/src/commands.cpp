#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "twomem/constants.hpp"
#include "twomem/digest.hpp"
#include "twomem/ensemble.hpp"
#include "twomem/errors.hpp"
#include "twomem/gridfile.hpp"
#include "twomem/maps.hpp"
#include "twomem/quantum.hpp"
#include "twomem/sync.hpp"

#ifndef TWOMEM_VERSION
#define TWOMEM_VERSION "unknown"
#endif

namespace twomem::cli {

namespace {

// Spread of the first-order ensemble around the mean-field oracle that a
// 384000-trajectory run reaches; --check scales it by 1/sqrt(N) and allows 5x.
constexpr double kReferenceSpread = 0.0012;
constexpr double kReferenceRealizations = 384000.0;

using Meta = std::vector<std::pair<std::string, std::string>>;

TableHeader make_header(const std::string& kind, const RunConfig& config, Meta meta, std::vector<std::string> columns) {
    TableHeader h;
    h.kind = kind;
    h.meta = provenance(config);
    h.meta.insert(h.meta.end(), meta.begin(), meta.end());
    h.config_lines = config.resolved_lines();
    h.columns = std::move(columns);
    return h;
}

std::filesystem::path prepare(const CommandOptions& o) {
    std::filesystem::create_directories(o.out);
    return o.out;
}

template <class... Args>
void note(const CommandOptions& o, fmt::format_string<Args...> f, Args&&... args) {
    if (o.log) fmt::print(*o.log, "{}\n", fmt::format(f, std::forward<Args>(args)...));
}

double in_lambda(const RunConfig& c, const std::string& key) { return c.position(key) / c.length("physical.lambda"); }

std::vector<double> linear_points(double lo, double hi, std::uint64_t n) {
    if (n == 0) throw ConfigError("point counts must be positive");
    std::vector<double> out(n, lo);
    for (std::uint64_t i = 1; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

std::vector<double> log_points(double lo, double hi, std::uint64_t n) {
    if (!(lo > 0.0) || !(hi > 0.0)) throw ConfigError("logarithmic ranges need positive bounds");
    auto out = linear_points(std::log(lo), std::log(hi), n);
    for (auto& v : out) v = std::exp(v);
    return out;
}

/// Ratio of whole steps, as the integrators count them.
std::uint64_t whole_steps(double span, double step, const char* what) {
    const double r = span / step;
    const auto n = std::llround(r);
    if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r))
        throw ConfigError(fmt::format("{} must be a positive multiple of the integration step", what));
    return static_cast<std::uint64_t>(n);
}

PlaneTransform histogram_plane(const std::string& name) {
    if (name == "epr_plus") return epr_plane(1.0);
    if (name == "epr_minus") return epr_plane(-1.0);
    if (name == "mode1") return identity_plane(1);
    return identity_plane(2);
}

// Heisenberg bound for each of the three modes: det of the 2x2 block >= 1/4.
bool modes_physical(const Mat6& c) {
    for (int m = 0; m < 3; ++m)
        if (c.block<2, 2>(2 * m, 2 * m).determinant() < 0.25 - 1e-9) return false;
    return true;
}

}  // namespace

const char* version() { return TWOMEM_VERSION; }

std::vector<std::pair<std::string, std::string>> provenance(const RunConfig& config) {
    std::string text;
    for (const auto& line : config.resolved_lines()) text += line + '\n';
    return {{"version", version()}, {"config_digest", to_hex(sha256(text))}};
}

int cmd_map(const RunConfig& c, const CommandOptions& o) {
    const auto dir = prepare(o);
    const auto params = physical_params(c);
    const auto grid = GridSpec::square(in_lambda(c, "analysis.q_min"), in_lambda(c, "analysis.q_max"), c.count("analysis.grid"));
    if (grid.n1 < 2 || !(grid.q1_max > grid.q1_min)) throw ConfigError("analysis: need grid >= 2 and q_max > q_min");
    const double threshold = c.number("analysis.threshold");
    const double fraction = c.number("analysis.region_fraction");
    if (!(threshold > 0.0) || !(fraction > 0.0)) throw ConfigError("analysis: threshold and region_fraction must be positive");

    const auto map = scan_plane(params, grid, o.workers);
    const auto mask = classify_regions(map, fraction / threshold, fraction);

    double gmax[5] = {}, rmax[4] = {};
    for (std::size_t k = 0; k < map.cells.size(); ++k) {
        if (!map.valid[k]) continue;
        const auto& s = map.cells[k];
        const double g[5] = {s.g1, s.g2, s.g12, s.g22, s.gt};
        for (int i = 0; i < 5; ++i) gmax[i] = std::max(gmax[i], std::abs(g[i]));
        const double r[4] = {s.g12 / s.g1, s.g22 / s.g2, s.gt / s.g1, s.gt / s.g2};
        for (int i = 0; i < 4; ++i)
            if (std::isfinite(r[i])) rmax[i] = std::max(rmax[i], std::abs(r[i]));
    }

    write_map_file(dir / "map.csv", map, mask, c.resolved_lines(), provenance(c));
    TableWriter summary(dir / "map_summary.csv",
                        make_header("map_summary", c, {{"units", "couplings in Hz"}, {"holes", std::to_string(map.holes)}},
                                    {"max_g1", "max_g2", "max_g12", "max_g22", "max_gt", "max_g12_over_g1",
                                     "max_g22_over_g2", "max_gt_over_g1", "max_gt_over_g2", "fraction_g12_g1",
                                     "fraction_g22_g2", "fraction_gt_g1", "fraction_gt_g2", "fraction_union"}));
    summary.row({hertz(gmax[0]), hertz(gmax[1]), hertz(gmax[2]), hertz(gmax[3]), hertz(gmax[4]), rmax[0], rmax[1],
                 rmax[2], rmax[3], mask.fractions[0], mask.fractions[1], mask.fractions[2], mask.fractions[3],
                 mask.union_fraction});
    summary.close();

    note(o, "max |g1|, |g2| = {:.4g}, {:.4g} Hz; max |g12|, |g22|, |gt| = {:.3g}, {:.3g}, {:.3g} Hz", hertz(gmax[0]),
         hertz(gmax[1]), hertz(gmax[2]), hertz(gmax[3]), hertz(gmax[4]));
    note(o, "union area fraction {:.4f} over {} cells ({} holes)", mask.union_fraction, map.cells.size(), map.holes);

    if (o.check) {
        const double want = c.number("analysis.check_union"), tol = c.number("analysis.check_union_tolerance");
        if (!(std::abs(mask.union_fraction - want) <= tol)) {
            note(o, "check failed: union fraction {:.4f} outside {} +- {}", mask.union_fraction, want, tol);
            return kCheckFailed;
        }
    }
    return kOk;
}

int cmd_sweep(const RunConfig& c, const CommandOptions& o) {
    const auto dir = prepare(o);
    const auto params = physical_params(c);
    const double Q1 = c.position("placement.Q1"), Q2 = c.position("placement.Q2");
    SyncSchedule sch;
    sch.tau_start = c.number("analysis.tau_start");
    sch.tau_window = c.number("analysis.tau_window");
    sch.dtau = c.number("integration.dtau");
    sch.stride = c.count("integration.stride");
    sch.demod.smoothing_periods = c.number("analysis.smoothing_periods");
    sch.demod.envelope_periods = c.number("analysis.envelope_periods");
    sch.seed_q = c.number("integration.initial_q1");
    const auto deltas = linear_points(c.frequency("analysis.delta_min"), c.frequency("analysis.delta_max"),
                                      c.count("analysis.delta_points"));
    const auto powers =
        log_points(c.power("analysis.power_min"), c.power("analysis.power_max"), c.count("analysis.power_points"));
    const double detuning = c.frequency("drive.detuning");

    std::size_t holes = 0;
    for (ModelTier tier : tiers(c, "analysis.tiers")) {
        PhaseDiagram d;
        try {
            d = sweep_phase_diagram(params, Q1, Q2, deltas, powers, detuning, tier, sch, o.workers);
        } catch (const SamplingTooCoarse& e) {
            throw ConfigError(fmt::format("integration.stride: {}", e.what()));
        }
        const std::string name = tier_name(tier);
        struct Measure {
            const char* label;
            double SyncReport::*field;
        };
        for (const Measure m : {Measure{"P_mean", &SyncReport::P_mean}, Measure{"P_var", &SyncReport::P_var},
                                Measure{"Rc", &SyncReport::Rc}}) {
            TableWriter w(dir / fmt::format("{}_{}.csv", m.label, name),
                          make_header("phase_diagram", c, {{"measure", m.label}, {"tier", name}},
                                      {"delta_hz", "power_w", m.label, "valid"}));
            for (std::size_t i = 0; i < deltas.size(); ++i)
                for (std::size_t j = 0; j < powers.size(); ++j) {
                    const std::size_t k = i * powers.size() + j;
                    w.row({hertz(deltas[i]), powers[j], d.valid[k] ? d.cells[k].*m.field : std::nan(""),
                           static_cast<double>(d.valid[k])});
                }
            w.close();
        }
        std::size_t tier_holes = 0;
        for (auto v : d.valid) tier_holes += v ? 0 : 1;
        holes += tier_holes;
        note(o, "{}: {} cells, {} holes", name, d.cells.size(), tier_holes);
    }
    if (o.check && holes > 0) {
        note(o, "check failed: {} cells did not complete", holes);
        return kCheckFailed;
    }
    return kOk;
}

int cmd_trajectory(const RunConfig& c, const CommandOptions& o) {
    const auto dir = prepare(o);
    const auto s = resolve_setup(c);
    const auto tier = parse_tier(c.text("integration.tier"));
    const DynamicsModel model(s.params, s.Q1, s.Q2, s.couplings, s.drive, tier, c.number("integration.ordering"));
    IntegratorOptions io;
    io.dtau = c.number("integration.dtau");
    io.tau_end = c.number("integration.tau_end");
    io.stride = c.count("integration.stride");
    if (!(io.dtau > 0.0) || !(io.tau_end >= 0.0) || io.stride < 1)
        throw ConfigError("integration: need dtau > 0, tau_end >= 0 and stride >= 1");
    const NoiseSpec noise{c.flag("noise.enabled"), c.count("noise.seed"), 0};
    const double wb = s.params.omega_bar();

    SystemState state0;
    state0.q1 = c.number("integration.initial_q1");
    state0.q2 = c.number("integration.initial_q2");

    const Meta meta = {{"tier", tier_name(tier)},
                       {"seed", std::to_string(noise.seed)},
                       {"noise", noise.enabled ? "true" : "false"},
                       {"units", "t in s, tau = omega_bar t, quadratures dimensionless"}};
    TableWriter traj(dir / "trajectory.csv",
                     make_header("trajectory", c, meta, {"t", "tau", "q1", "p1", "q2", "p2", "re_a", "im_a"}));

    const bool envelope = c.flag("analysis.envelope");
    std::optional<EnvelopeTracker> tracker;
    std::optional<TableWriter> env;
    if (envelope) {
        DemodulationOptions d;
        d.smoothing_periods = c.number("analysis.smoothing_periods");
        d.envelope_periods = c.number("analysis.envelope_periods");
        try {
            tracker.emplace(wb, io.dtau * static_cast<double>(io.stride) / wb, d);
        } catch (const SamplingTooCoarse& e) {
            throw ConfigError(fmt::format("integration.stride: {}", e.what()));
        }
        env.emplace(dir / "envelope.csv",
                    make_header("envelope", c, meta, {"t", "tau", "abs_A1", "abs_A2", "theta1", "theta2"}));
    }
    SyncAccumulator acc(c.number("analysis.tau_start") / wb, c.number("analysis.tau_window") / wb);
    double theta[2] = {0.0, 0.0}, last[2] = {0.0, 0.0};
    bool first = true, bounded = true;

    auto observe = [&](const SystemState& x) {
        traj.row({x.t, x.t * wb, x.q1, x.p1, x.q2, x.p2, x.a.real(), x.a.imag()});
        if (!tracker) return;
        const auto e = tracker->push(x);
        const double arg[2] = {std::arg(e.A1), std::arg(e.A2)};
        for (int j = 0; j < 2; ++j) {
            // unwrap against the previous sample
            theta[j] = first ? arg[j] : theta[j] + std::remainder(arg[j] - last[j], kTwoPi);
            last[j] = arg[j];
        }
        first = false;
        bounded = bounded && std::isfinite(std::abs(e.A1)) && std::isfinite(std::abs(e.A2));
        env->row({x.t, x.t * wb, std::abs(e.A1), std::abs(e.A2), theta[0], theta[1]});
        acc.add(x.t, e.A1, e.A2);
    };
    try {
        propagate(model, state0, noise, io, observe);
    } catch (const NonFiniteError&) {
        traj.close();
        if (env) env->close();
        throw;
    }
    traj.close();
    if (!env) return kOk;
    env->close();

    const auto r = acc.report();
    TableWriter sum(dir / "sync_summary.csv",
                    make_header("sync_report", c, meta, {"Rc", "P_mean", "P_var", "t_s", "window", "samples"}));
    sum.row({r.Rc, r.P_mean, r.P_var, r.t_s, r.window, static_cast<double>(r.samples)});
    sum.close();
    note(o, "window samples {}, P_mean {:.4f}, P_var {:.4f}, Rc {:.4f}", r.samples, r.P_mean, r.P_var, r.Rc);
    if (o.check && (!bounded || r.samples == 0)) {
        note(o, "check failed: {}", bounded ? "analysis window holds no samples" : "envelope not finite");
        return kCheckFailed;
    }
    return kOk;
}

int cmd_entangle(const RunConfig& c, const CommandOptions& o) {
    const auto dir = prepare(o);
    const auto s = resolve_setup(c);
    const double dtau = c.number("ensemble.dtau");
    const double tau_end = c.number("ensemble.tau_end");
    const double every = c.number("ensemble.sample_every");
    if (!(dtau > 0.0) || !(tau_end > 0.0)) throw ConfigError("ensemble: need dtau > 0 and tau_end > 0");
    const std::uint64_t stride = whole_steps(every, dtau, "ensemble.sample_every");
    const std::uint64_t samples = static_cast<std::uint64_t>(std::floor(tau_end / every + 1e-9)) + 1;

    EnsembleSpec base;
    base.realizations = c.count("ensemble.realizations");
    base.shard_size = c.count("ensemble.shard_size");
    base.master_seed = c.count("noise.seed");
    base.params = s.params;
    base.Q1 = s.Q1;
    base.Q2 = s.Q2;
    base.couplings = s.couplings;
    base.drive = s.drive;
    base.ordering = c.number("integration.ordering");
    base.vacuum_initial = c.flag("ensemble.vacuum_initial");
    base.dtau = dtau;
    for (std::uint64_t k = 0; k < samples; ++k) base.sample_taus.push_back(static_cast<double>(k * stride) * dtau);
    for (const auto& name : c.list("ensemble.histograms"))
        base.histograms.push_back(
            {histogram_plane(name), name, c.number("ensemble.histogram_h"), c.number("ensemble.histogram_extent")});

    std::vector<double> tau_grid = base.sample_taus;
    std::vector<double> En_meanfield;
    if (c.flag("ensemble.meanfield")) {
        MeanfieldOptions mo;
        mo.dtau = dtau;
        mo.tau_end = base.sample_taus.back();
        mo.stride = stride;
        const auto states = meanfield_evolve(s.params, s.couplings, s.drive, mo);
        TableWriter w(dir / "meanfield.csv", make_header("meanfield_En", c, {}, {"t", "tau", "En", "duan_plus", "duan_minus"}));
        for (const auto& st : states) {
            En_meanfield.push_back(logarithmic_negativity(st));
            w.row({st.t, st.t * s.params.omega_bar(), En_meanfield.back(), duan_sum(st, 1.0), duan_sum(st, -1.0)});
        }
        w.close();
    }

    bool ok = true;
    const std::string checkpoint = c.is_none("ensemble.checkpoint") ? "" : c.text("ensemble.checkpoint");
    for (ModelTier tier : tiers(c, "ensemble.tiers")) {
        EnsembleSpec spec = base;
        spec.tier = tier;
        try {
            spec.validate();
        } catch (const DomainError& e) {
            throw ConfigError(fmt::format("ensemble: {}", e.what()));
        }
        const std::string name = tier_name(tier);
        RunControl control;
        if (!checkpoint.empty()) control.checkpoint = dir / fmt::format("{}.{}", checkpoint, name);
        control.resume = c.flag("ensemble.resume");
        const auto r = run_ensemble(spec, o.workers, control);

        const Meta meta = {{"tier", name},
                           {"spec_digest", r.spec_digest},
                           {"seed", std::to_string(r.master_seed)},
                           {"N", std::to_string(r.realized)},
                           {"requested", std::to_string(r.requested)},
                           {"aborted", std::to_string(r.aborted)},
                           {"runtime_s", format_number(r.runtime_seconds)}};
        TableWriter w(dir / fmt::format("entangle_{}.csv", name),
                      make_header("ensemble_En", c, meta,
                                  {"t", "tau", "En", "duan_plus", "duan_minus", "var_q1", "var_p1", "var_q2", "var_p2"}));
        for (std::size_t i = 0; i < r.moments.size(); ++i) {
            const auto& m = r.moments[i];
            w.row({m.t, spec.sample_taus[i], r.En[i], r.duan_plus[i], r.duan_minus[i], m.cov(2, 2), m.cov(3, 3),
                   m.cov(4, 4), m.cov(5, 5)});
        }
        w.close();
        for (std::size_t k = 0; k < r.histograms.size(); ++k) {
            const auto& h = r.histograms[k];
            const auto density = h.density();
            TableWriter hw(dir / fmt::format("hist_{}_{}.csv", name, spec.histograms[k].label),
                           make_header("phase_space_histogram", c,
                                       {{"tier", name},
                                        {"plane", spec.histograms[k].label},
                                        {"tau", format_number(spec.sample_taus.back())},
                                        {"h", format_number(h.h())},
                                        {"total", std::to_string(h.total())},
                                        {"inside", std::to_string(h.inside())}},
                                       {"X", "Y", "density"}));
            for (std::size_t i = 0; i < h.side(); ++i)
                for (std::size_t j = 0; j < h.side(); ++j) hw.row({h.centre(i), h.centre(j), density[i * h.side() + j]});
            hw.close();
        }
        note(o, "{}: N = {}, final En = {:.4f}, duan(+) = {:.4f}, {:.1f} s", name, r.realized, r.En.back(),
             r.duan_plus.back(), r.runtime_seconds);

        if (tier == ModelTier::FirstOrder && !En_meanfield.empty()) {
            const double t1 = c.number("ensemble.error_start");
            const double sigma = error_metric(tau_grid, r.En, En_meanfield, t1, tau_grid.back());
            TableWriter ew(dir / "error_first_order.csv",
                           make_header("meanfield_error", c, {{"sigma_Er", format_number(sigma)}, {"N", std::to_string(r.realized)}},
                                       {"tau", "Er"}));
            for (std::size_t i = 0; i < tau_grid.size(); ++i) ew.row({tau_grid[i], r.En[i] - En_meanfield[i]});
            ew.close();
            const double bound = c.is_none("analysis.check_max_error")
                                     ? 5.0 * kReferenceSpread * std::sqrt(kReferenceRealizations / static_cast<double>(r.realized))
                                     : c.number("analysis.check_max_error");
            note(o, "first_order vs meanfield: sigma(Er) = {:.5f} (bound {:.5f})", sigma, bound);
            if (!(sigma <= bound)) ok = false;
        }
    }
    if (o.check && !ok) {
        note(o, "check failed: ensemble departs from the mean-field oracle");
        return kCheckFailed;
    }
    return kOk;
}

int cmd_meanfield(const RunConfig& c, const CommandOptions& o) {
    const auto dir = prepare(o);
    const auto s = resolve_setup(c);
    MeanfieldOptions mo;
    mo.dtau = c.number("integration.dtau");
    mo.tau_end = c.number("integration.tau_end");
    mo.stride = c.count("integration.stride");
    if (!(mo.dtau > 0.0) || !(mo.tau_end >= 0.0) || mo.stride < 1)
        throw ConfigError("integration: need dtau > 0, tau_end >= 0 and stride >= 1");
    const auto states = meanfield_evolve(s.params, s.couplings, s.drive, mo);

    std::vector<std::string> columns = {"t",      "tau",    "En",      "duan_plus", "duan_minus", "mean_x", "mean_y",
                                        "mean_q1", "mean_p1", "mean_q2", "mean_p2"};
    const char* names[6] = {"x", "y", "q1", "p1", "q2", "p2"};
    for (int i = 0; i < 6; ++i)
        for (int j = i; j < 6; ++j) columns.push_back(fmt::format("C_{}_{}", names[i], names[j]));
    TableWriter w(dir / "meanfield.csv", make_header("meanfield", c, {{"tier", "first_order"}}, columns));
    bool physical = true;
    for (const auto& st : states) {
        std::vector<double> row = {st.t,          st.t * s.params.omega_bar(), logarithmic_negativity(st),
                                   duan_sum(st, 1.0), duan_sum(st, -1.0)};
        for (int i = 0; i < 6; ++i) row.push_back(st.mean[i]);
        for (int i = 0; i < 6; ++i)
            for (int j = i; j < 6; ++j) row.push_back(st.cov(i, j));
        w.row(row);
        physical = physical && modes_physical(st.cov);
    }
    w.close();
    note(o, "{} samples, final En = {:.5f}", states.size(), logarithmic_negativity(states.back()));
    if (o.check && !physical) {
        note(o, "check failed: a mode covariance violates the uncertainty bound");
        return kCheckFailed;
    }
    return kOk;
}

int dispatch(const std::string& command, const RunConfig& config, const CommandOptions& options, std::ostream& err) {
    try {
        if (command == "map") return cmd_map(config, options);
        if (command == "sweep") return cmd_sweep(config, options);
        if (command == "trajectory") return cmd_trajectory(config, options);
        if (command == "entangle") return cmd_entangle(config, options);
        if (command == "meanfield") return cmd_meanfield(config, options);
        fmt::print(err, "unknown command '{}'\n", command);
        return kConfigError;
    } catch (const ConfigError& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return kConfigError;
    } catch (const CheckpointError& e) {
        fmt::print(err, "checkpoint error: {}\n", e.what());
        return kConfigError;
    } catch (const NonFiniteError& e) {
        fmt::print(err, "numerical abort at t = {:.6g} s: {}\n", e.time(), e.what());
        return kNumericalAbort;
    } catch (const Error& e) {
        fmt::print(err, "numerical abort: {}\n", e.what());
        return kNumericalAbort;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(err, "output error: {}\n", e.what());
        return kConfigError;
    }
}

}  // namespace twomem::cli
