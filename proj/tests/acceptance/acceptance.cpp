// End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//
//   acceptance [--suite fast|slow|all] [--only AC3,AC8] [--expect-fail AC2] [--workers K]
//
// Exit status is 0 unless a criterion that is not listed in --expect-fail
// fails (or throws). Expected failures are still printed as FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "oracles.hpp"
#include "twomem/constants.hpp"
#include "twomem/ensemble.hpp"
#include "twomem/errors.hpp"
#include "twomem/maps.hpp"
#include "twomem/model.hpp"
#include "twomem/quantum.hpp"
#include "twomem/sync.hpp"

using namespace twomem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

unsigned g_workers = 0;

double hz(double rad_per_s) { return rad_per_s / kTwoPi; }

std::vector<double> logspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * (n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
}

// least-squares slope of log y against log x
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

const CouplingMap& reference_map() {
    static const CouplingMap map = scan_plane(PhysicalParams::reference(), GridSpec::square(0.25, 0.75, 256), g_workers);
    return map;
}

// ---------------------------------------------------------------------------
// two-tone entanglement setup: omega2 = 1.1 omega1, short cavity, zero temperature,
// sideband rates 12163.6 and 45180.3 rad/s, laser on the shifted resonance

struct TwoToneSetup {
    PhysicalParams params;
    double Q1 = 0.0, Q2 = 0.0;
    CouplingSet couplings;
    DriveSpec drive;
};

TwoToneSetup two_tone_setup(double Q1_over_lambda) {
    PhysicalParams p = PhysicalParams::reference();
    p.omega1 = kTwoPi * 235e3;
    p.omega2 = 1.1 * p.omega1;
    p.L = 9e-3;
    p.nbar_a = p.nbar_1 = p.nbar_2 = 0.0;
    TwoToneSetup s;
    s.Q1 = Q1_over_lambda * p.lambda;
    s.Q2 = -s.Q1;
    s.params = with_shifted_detuning(p, s.Q1, s.Q2, 0.0);
    s.couplings = coupling_coefficients(s.params, s.Q1, s.Q2);
    s.drive = DriveSpec::from_sideband_rates(12163.6, 45180.3, s.params, s.couplings);
    return s;
}

EnsembleSpec ensemble_spec(const TwoToneSetup& s, ModelTier tier, std::uint64_t n, std::uint64_t seed,
                           std::vector<double> taus) {
    EnsembleSpec e;
    e.realizations = n;
    e.shard_size = 1024;
    e.master_seed = seed;
    e.tier = tier;
    e.params = s.params;
    e.Q1 = s.Q1;
    e.Q2 = s.Q2;
    e.couplings = s.couplings;
    e.drive = s.drive;
    e.dtau = 0.01;
    e.sample_taus = std::move(taus);
    return e;
}

// merges equal-time moments of independent batches into one estimate
CovarianceState pool(const std::vector<const EnsembleResult*>& parts, std::size_t k) {
    std::array<double, 6> sum{};
    std::array<double, 21> cross{};
    double n = 0.0;
    double t = 0.0;
    for (const auto* r : parts) {
        const auto& m = r->moments[k];
        const double nb = static_cast<double>(r->realized);
        for (std::size_t i = 0; i < 6; ++i) {
            sum[i] += nb * m.mean(i);
            for (std::size_t j = i; j < 6; ++j)
                cross[packed_index(i, j)] += (nb - 1.0) * m.cov(i, j) + nb * m.mean(i) * m.mean(j);
        }
        n += nb;
        t = m.t;
    }
    return moments_from_sums(n, sum, cross, t);
}

// ---------------------------------------------------------------------------

Outcome ac1() {
    const auto p = PhysicalParams::reference();
    const auto r = membrane_reflectivity(p.n_refr, p.Lz, p.lambda);
    const bool ok = std::abs(r.R - 0.4082) <= 1e-3 && std::abs(r.phi - (-0.182)) <= 1e-3;
    return {ok, fmt::format("R = {:.5f} (0.4082), phi = {:.5f} rad (-0.182), tolerance 1e-3", r.R, r.phi)};
}

Outcome ac2() {
    const auto p = PhysicalParams::reference();
    const double c1 = p.chi_zpf1(), c2 = p.chi_zpf2();
    const double e1 = c1 / 6.192e-16 - 1.0, e2 = c2 / 6.184e-16 - 1.0;
    const bool ok = std::abs(e1) <= 1e-3 && std::abs(e2) <= 1e-3;
    return {ok, fmt::format("chi1 = {:.4e} m ({:+.2f}%), chi2 = {:.4e} m ({:+.2f}%), tolerance 0.1%", c1, 100 * e1, c2,
                            100 * e2)};
}

Outcome ac3() {
    const auto p = PhysicalParams::reference();
    const oracle::Cavity cav(p);
    std::mt19937_64 rng(20240607);
    std::uniform_real_distribution<double> pos(0.0, 1.0), disp(-1e3, 1e3);
    double worst = 0.0;
    int checked = 0, skipped = 0;
    while (checked < 100) {
        const double Q1 = pos(rng) * p.lambda, Q2 = pos(rng) * p.lambda, q1 = disp(rng), q2 = disp(rng);
        ShiftGradient g;
        try {
            g = coupling_gradient(p, Q1, Q2, q1, q2);
        } catch (const DomainError&) {
            ++skipped;
            continue;
        }
        const auto ref = cav.gradient(Q1, Q2, q1, q2, oracle::mp("1e-4"));
        for (int j = 0; j < 2; ++j) {
            const double want = oracle::to_double(ref[j]);
            const double got = j == 0 ? g.L1 : g.L2;
            worst = std::max(worst, std::abs(got - want) / std::abs(want));
        }
        ++checked;
    }
    return {worst < 1e-6, fmt::format("max relative error {:.2e} over {} points ({} off the branch), bound 1e-6", worst,
                                      checked, skipped)};
}

Outcome ac4() {
    const auto& map = reference_map();
    double g = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < map.cells.size(); ++i) {
        if (!map.valid[i]) continue;
        const auto& c = map.cells[i];
        g = std::max({g, std::abs(c.g1), std::abs(c.g2)});
        g2 = std::max({g2, std::abs(c.g12), std::abs(c.g22)});
    }
    const double gh = hz(g), g2h = hz(g2);
    const bool ok = gh >= 1.0 && gh <= 100.0 && g2h >= 1e-8 && g2h <= 1e-6;
    return {ok, fmt::format("max |g_j|/2pi = {:.3f} Hz in [1, 100], max |g_j2|/2pi = {:.3e} Hz in [1e-8, 1e-6], {} holes",
                            gh, g2h, map.holes)};
}

Outcome ac5() {
    const auto p = PhysicalParams::reference();
    const auto line = scan_line(p, 0.5, 0.25, 0.75, 256);
    double worst = 0.0, at = 0.0;
    for (const auto& s : line) {
        if (!s.valid || s.couplings.g1 == 0.0) continue;
        const double r = std::abs(s.couplings.g12 / s.couplings.g1);
        if (r > worst) worst = r, at = s.q1;
    }
    return {worst >= 3e-6 && worst <= 3e-5,
            fmt::format("max |g12/g1| = {:.3e} at Q1 = {:.4f} lambda (256 points), band [3e-6, 3e-5]", worst, at)};
}

Outcome ac6() {
    const auto& map = reference_map();
    const auto mask = classify_regions(map);
    const double f = mask.union_fraction;
    const auto coarse = classify_regions(scan_plane(PhysicalParams::reference(), GridSpec::square(0.25, 0.75, 128), g_workers));
    return {std::abs(f - 0.265) <= 0.02,
            fmt::format("union fraction {:.2f}% at 256^2 (26.5 +- 2), {:.2f}% at 128^2, per-criterion {:.1f}/{:.1f}/{:.1f}/{:.1f}%",
                        100 * f, 100 * coarse.union_fraction, 100 * mask.fractions[0], 100 * mask.fractions[1],
                        100 * mask.fractions[2], 100 * mask.fractions[3])};
}

Outcome ac7() {
    const auto pts = region_width_sweep(PhysicalParams::reference(), {20e-9, 50e-9, 104e-9},
                                        GridSpec::square(0.25, 0.75, 256), 3.1622776601683795e-8, g_workers);
    bool ok = true;
    std::string d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        d += fmt::format("{}Lz {:.0f} nm: width {:.4f} lambda (R {:.3f})", i ? ", " : "", pts[i].Lz * 1e9,
                         pts[i].width.mean_width, pts[i].reflectivity.R);
        if (i && !(pts[i].width.mean_width < pts[i - 1].width.mean_width)) ok = false;
    }
    return {ok, d};
}

Outcome ac8() {
    // Only the displacement-dependent terms differ between tiers; they are compared
    // directly because the full drift vector also carries kappa a and Delta' a terms
    // whose rounding (~1e-8 rad/s) exceeds the cubic residual at q ~ 10.
    const auto base = PhysicalParams::reference();
    std::string d;
    bool ok = true;
    for (auto [a, b] : {std::pair{0.562, 0.440}, std::pair{0.3040, 0.3330}, std::pair{0.3800, 0.4090}}) {
        const double Q1 = a * base.lambda, Q2 = b * base.lambda;
        const auto p = with_shifted_detuning(base, Q1, Q2, base.omega_bar());
        const auto c = coupling_coefficients(p, Q1, Q2);
        const Placement place(p, Q1, Q2);
        std::vector<double> qs = logspace(10.0, 1e3, 9), shift_res, force_res;
        for (double q : qs) {
            const double q1 = q, q2 = -0.7 * q;
            const double full = -place.shift_change(q1, q2);
            const double second =
                c.g1 * q1 + c.g2 * q2 - 0.5 * c.g12 * q1 * q1 - 0.5 * c.g22 * q2 * q2 - c.gt * q1 * q2;
            shift_res.push_back(std::abs(full - second));
            const auto g = place.gradient(q1, q2);
            force_res.push_back(std::hypot(g.L1 - (c.g1 - c.g12 * q1 - c.gt * q2), g.L2 - (c.g2 - c.g22 * q2 - c.gt * q1)));
        }
        const double s = loglog_slope(qs, shift_res), f = loglog_slope(qs, force_res);
        if (!(s >= 2.5)) ok = false;
        d += fmt::format("{}({:.3f},{:.3f}): frequency-shift slope {:.3f}, force slope {:.3f}", d.empty() ? "" : "; ", a,
                         b, s, f);
    }
    return {ok, d + " (criterion on the frequency-shift term, >= 2.5)"};
}

Outcome ac9() {
    const auto base = [] {
        auto p = PhysicalParams::reference();
        set_mechanical_frequencies(p, p.omega_bar(), kTwoPi * 1e3);
        return p;
    }();
    const std::array<std::pair<double, double>, 5> pts{
        {{0.3040, 0.3330}, {0.3020, 0.3310}, {0.2980, 0.3270}, {0.2840, 0.3131}, {0.3800, 0.4090}}};
    const auto xs = logspace(1e-3, 0.5, 12);
    SyncSchedule sch;
    sch.tau_start = 3e5;
    sch.tau_window = 2e5;
    sch.dtau = 0.05;
    sch.stride = 5;
    sch.seed_reference = 1.0;

    std::vector<std::vector<DriveCurvePoint>> first(5), full(5);
    for (std::size_t k = 0; k < 5; ++k) {
        const double Q1 = pts[k].first * base.lambda;
        const double Q2 = equalize_couplings(base, Q1, pts[k].second * base.lambda, 0.005 * base.lambda);
        first[k] = sweep_drive_curve(base, Q1, Q2, xs, base.omega_bar(), ModelTier::FirstOrder, sch, g_workers);
        full[k] = sweep_drive_curve(base, Q1, Q2, xs, base.omega_bar(), ModelTier::Full, sch, g_workers);
    }
    double spread = 0.0;
    std::size_t bad_first = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t k = 1; k < 5; ++k) {
            if (!first[k][i].valid || !first[0][i].valid) {
                ++bad_first;
                continue;
            }
            spread = std::max(spread, std::abs(first[k][i].report.P_mean - first[0][i].report.P_mean));
        }
    // deviation of each full-tier curve from the common first-order curve
    std::array<double, 5> dev{};
    std::size_t invalid_full = 0;
    for (std::size_t k = 0; k < 5; ++k)
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!full[k][i].valid) {
                ++invalid_full;
                continue;
            }
            dev[k] = std::max(dev[k], std::abs(full[k][i].report.P_mean - first[k][i].report.P_mean));
        }
    const bool one_is_max = std::max_element(dev.begin(), dev.end()) == dev.begin();
    const bool ok = bad_first == 0 && spread <= 1e-6 && one_is_max && dev[0] > 0.1;
    return {ok, fmt::format("first-order spread {:.2e} (<= 1e-6); full-tier max |P_full - P_first| per point 1..5: "
                            "{:.3f} {:.3f} {:.3f} {:.3f} {:.3f} (point 1 largest and > 0.1); {} full-tier cells aborted",
                            spread, dev[0], dev[1], dev[2], dev[3], dev[4], invalid_full)};
}

Outcome ac10() {
    const auto p = PhysicalParams::reference();
    const double Q1 = 0.562 * p.lambda, Q2 = 0.440 * p.lambda;
    std::vector<double> deltas = linspace(kTwoPi * 0.5e3, kTwoPi * 30e3, 12);
    const auto powers = logspace(10e-6, 100e-3, 12);
    SyncSchedule sch;
    sch.tau_start = 2e6;
    sch.tau_window = 5e5;
    sch.dtau = 0.05;
    sch.stride = 5;
    const auto full = sweep_phase_diagram(p, Q1, Q2, deltas, powers, p.omega_bar(), ModelTier::Full, sch, g_workers);
    const auto first = sweep_phase_diagram(p, Q1, Q2, deltas, powers, p.omega_bar(), ModelTier::FirstOrder, sch, g_workers);
    const std::size_t np = powers.size();
    double best_ratio = 0.0;
    bool found = false;
    double weak_dev = 0.0;
    std::size_t weak_invalid = 0, invalid = 0;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        for (std::size_t j = 0; j < np; ++j) {
            const std::size_t k = i * np + j;
            const bool both = full.valid[k] && first.valid[k];
            if (!both) ++invalid;
            if (j < np / 3) {
                if (!both) {
                    ++weak_invalid;
                    continue;
                }
                weak_dev = std::max(weak_dev, std::abs(full.cells[k].P_mean - first.cells[k].P_mean));
            } else if (j >= np - np / 3 && both) {
                const double a = full.cells[k].P_var, b = first.cells[k].P_var;
                if (a > 10.0 * b) found = true;
                if (b > 0.0) best_ratio = std::max(best_ratio, a / b);
            }
        }
    const bool ok = found && weak_invalid == 0 && weak_dev < 0.05;
    return {ok, fmt::format("high-power third: max dP_full/dP_first = {:.3g} (need > 10 somewhere, found = {}); weak third "
                            "max |dPbar| = {:.4f} (< 0.05); {} cells aborted",
                            best_ratio, found, weak_dev, invalid)};
}

Outcome ac11() {
    const Mat4 vac = 0.5 * Mat4::Identity();
    const double e0 = logarithmic_negativity(vac);
    double worst = 0.0;
    for (double r : {0.1, 0.5, 1.0}) {
        const double c = 0.5 * std::cosh(2 * r), s = 0.5 * std::sinh(2 * r);
        Mat4 v = Mat4::Zero();
        v.diagonal().setConstant(c);
        v(0, 2) = v(2, 0) = s;
        v(1, 3) = v(3, 1) = -s;
        worst = std::max(worst, std::abs(logarithmic_negativity(v) - 2 * r));
    }
    const double d = duan_sum(vac, 1.0);
    return {e0 == 0.0 && worst <= 1e-9 && d == 2.0,
            fmt::format("vacuum En = {}, two-mode squeezed max |En - 2r| = {:.1e}, vacuum Duan sum = {}", e0, worst, d)};
}

Outcome ac12() {
    const auto s = two_tone_setup(-0.09);
    const double tau_end = 2000.0, every = 10.0, dtau = 0.01;
    std::vector<double> taus;
    for (double t = 0.0; t <= tau_end + 1e-9; t += every) taus.push_back(t);
    MeanfieldOptions mo;
    mo.dtau = dtau;
    mo.tau_end = tau_end;
    mo.stride = static_cast<std::size_t>(std::llround(every / dtau));
    std::vector<double> mf;
    for (const auto& st : meanfield_evolve(s.params, s.couplings, s.drive, mo)) mf.push_back(logarithmic_negativity(st));

    auto sigma = [&](std::uint64_t n, std::uint64_t seed) {
        const auto r = run_ensemble(ensemble_spec(s, ModelTier::FirstOrder, n, seed, taus), g_workers);
        return error_metric(taus, r.En, mf, 0.0, tau_end);
    };
    const double s4 = sigma(4000, 11), s16 = sigma(16000, 12);
    const double bound = 5.0 * 0.0012 * std::sqrt(384000.0 / 4000.0);
    const double ratio = s16 / s4;
    const bool ok = s4 <= bound && std::abs(ratio - 0.5) <= 0.35 * 0.5;
    return {ok, fmt::format("sigma(Er) = {:.5f} at N = 4000 (bound {:.4f}), {:.5f} at N = 16000, ratio {:.3f} "
                            "(0.5 within 35%), mean-field En at tau {:.0f} = {:.4f}",
                            s4, bound, s16, ratio, tau_end, mf.back())};
}

// Runs of criteria 13 and 14, kept so 14 reuses the point-A ensembles.
struct TierRun {
    std::vector<EnsembleResult> batches;
    CovarianceState final_state;
};

constexpr std::uint64_t kBatches = 8;
constexpr std::uint64_t kPerTier = 24000;
constexpr double kTauEnd = 2500.0, kTauAverage = 2000.0, kEvery = 10.0;
constexpr double kDenseSpan = 3.5, kDenseStep = 0.05;  // covers one oscillation of the lab-frame EPR variances

std::vector<double> entanglement_taus() {
    std::vector<double> taus;
    for (double t = 0.0; t < kTauEnd - kDenseSpan - 1e-9; t += kEvery) taus.push_back(t);
    for (double t = kTauEnd - kDenseSpan; t <= kTauEnd + 1e-9; t += kDenseStep) taus.push_back(std::round(t / 0.01) * 0.01);
    return taus;
}

struct PointRuns {
    std::vector<double> taus;
    TierRun first, full;
};

PointRuns run_point(double Q1_over_lambda) {
    const auto s = two_tone_setup(Q1_over_lambda);
    PointRuns out;
    out.taus = entanglement_taus();
    for (auto* run : {&out.first, &out.full}) {
        const ModelTier tier = run == &out.first ? ModelTier::FirstOrder : ModelTier::Full;
        for (std::uint64_t b = 0; b < kBatches; ++b)
            run->batches.push_back(run_ensemble(ensemble_spec(s, tier, kPerTier / kBatches, 1000 + b, out.taus), g_workers));
    }
    return out;
}

// window-averaged En of a set of batches, on the regular part of the grid
double window_En(const std::vector<double>& taus, const std::vector<const EnsembleResult*>& parts) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        if (taus[k] < kTauAverage || taus[k] > kTauEnd - kDenseSpan) continue;
        sum += logarithmic_negativity(pool(parts, k));
        ++n;
    }
    return sum / n;
}

struct TierEstimate {
    double En = 0.0, se = 0.0;
};

TierEstimate estimate(const std::vector<double>& taus, const TierRun& run) {
    std::vector<const EnsembleResult*> all;
    std::vector<double> per;
    for (const auto& b : run.batches) {
        all.push_back(&b);
        per.push_back(window_En(taus, {&b}));
    }
    const double m = std::accumulate(per.begin(), per.end(), 0.0) / per.size();
    double v = 0.0;
    for (double x : per) v += (x - m) * (x - m);
    v /= (per.size() - 1);
    return {window_En(taus, all), std::sqrt(v / per.size())};
}

PointRuns& point_a() {
    static PointRuns r = run_point(-0.09);
    return r;
}

Outcome ac13() {
    auto compare = [](const PointRuns& r) {
        const auto f = estimate(r.taus, r.first), F = estimate(r.taus, r.full);
        return std::array<double, 4>{F.En - f.En, std::hypot(f.se, F.se), f.En, F.En};
    };
    const auto a = compare(point_a());
    const auto b = compare(run_point(0.06));
    const bool a_ok = a[0] > 0.0 && a[0] >= 3.0 * a[1] && std::abs(a[0] - 0.06) <= 0.03;
    const bool b_ok = b[0] < 0.0 && -b[0] >= 3.0 * b[1];
    return {a_ok && b_ok,
            fmt::format("A: En first {:.4f}, full {:.4f}, diff {:+.5f} +- {:.5f} (need > 3 se and 0.06 +- 0.03); "
                        "B: En first {:.4f}, full {:.4f}, diff {:+.5f} +- {:.5f} (need < -3 se); N = {} per tier, "
                        "tau window [{:.0f}, {:.0f}]",
                        a[2], a[3], a[0], a[1], b[2], b[3], b[0], b[1], kPerTier, kTauAverage, kTauEnd)};
}

Outcome ac14() {
    const auto& r = point_a();
    auto lowest = [&](const TierRun& run, double* last) {
        std::vector<const EnsembleResult*> all;
        for (const auto& b : run.batches) all.push_back(&b);
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < r.taus.size(); ++k) {
            if (r.taus[k] < kTauEnd - kDenseSpan - 1e-9) continue;
            const double d = duan_sum(pool(all, k), 1.0);
            lo = std::min(lo, d);
            *last = d;
        }
        return lo;
    };
    double last_full = 0.0, last_first = 0.0;
    const double full = lowest(r.full, &last_full), first = lowest(r.first, &last_first);
    return {full < 2.0, fmt::format("full tier: min over the last {:.1f} tau of Var(q1+q2)+Var(p1-p2) = {:.4f} (< 2), "
                                    "{:.4f} at tau {:.0f}; first order: {:.4f} / {:.4f}",
                                    kDenseSpan, full, last_full, kTauEnd, first, last_first)};
}

Outcome ac15() {
    const auto s = two_tone_setup(-0.09);
    auto spec = ensemble_spec(s, ModelTier::FirstOrder, 2048, 5, linspace(0.0, 200.0, 11));
    spec.shard_size = 256;
    spec.histograms.push_back({epr_plane(1.0), "epr_plus", 0.05, 5.0});
    auto same = [](const EnsembleResult& a, const EnsembleResult& b) {
        if (a.En != b.En || a.duan_plus != b.duan_plus || a.duan_minus != b.duan_minus) return false;
        for (std::size_t i = 0; i < a.moments.size(); ++i)
            if (a.moments[i].mean != b.moments[i].mean || a.moments[i].cov != b.moments[i].cov) return false;
        for (std::size_t i = 0; i < a.histograms.size(); ++i)
            if (a.histograms[i].counts() != b.histograms[i].counts()) return false;
        return a.realized == b.realized;
    };
    const auto one = run_ensemble(spec, 1);
    const auto eight = run_ensemble(spec, 8);

    const auto dir = std::filesystem::temp_directory_path() / fmt::format("twomem_acceptance_{}", ::getpid());
    std::filesystem::create_directories(dir);
    RunControl stop;
    stop.checkpoint = dir / "run.ckpt";
    stop.max_shards = 3;
    const auto partial = run_ensemble(spec, 1, stop);
    RunControl resume;
    resume.checkpoint = stop.checkpoint;
    resume.resume = true;
    const auto resumed = run_ensemble(spec, 8, resume);
    std::filesystem::remove_all(dir);

    const bool workers_ok = same(one, eight), resume_ok = !partial.complete && same(one, resumed);
    return {workers_ok && resume_ok,
            fmt::format("workers 1 vs 8 bit-identical: {}; stopped after {} of {} realizations and resumed bit-identical: {}",
                        workers_ok, partial.realized, spec.realizations, resume_ok)};
}

struct Criterion {
    std::string id;
    bool slow;
    std::function<Outcome()> run;
};

std::set<std::string> split(const std::string& s) {
    std::set<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.insert(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::string suite = "fast";
    std::set<std::string> only, expected;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        auto value = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::cerr << a << " needs a value\n";
                std::exit(2);
            }
            return argv[++i];
        };
        if (a == "--suite")
            suite = value();
        else if (a == "--only")
            only = split(value());
        else if (a == "--expect-fail")
            expected = split(value());
        else if (a == "--workers")
            g_workers = static_cast<unsigned>(std::stoul(value()));
        else {
            std::cerr << "usage: acceptance [--suite fast|slow|all] [--only IDS] [--expect-fail IDS] [--workers K]\n";
            return 2;
        }
    }
    if (suite != "fast" && suite != "slow" && suite != "all") {
        std::cerr << "unknown suite '" << suite << "'\n";
        return 2;
    }

    const std::vector<Criterion> criteria{
        {"AC1", false, ac1},   {"AC2", false, ac2},   {"AC3", false, ac3},   {"AC4", false, ac4},
        {"AC5", false, ac5},   {"AC6", false, ac6},   {"AC7", false, ac7},   {"AC8", false, ac8},
        {"AC9", false, ac9},   {"AC10", true, ac10},  {"AC11", false, ac11}, {"AC12", false, ac12},
        {"AC13", true, ac13},  {"AC14", true, ac14},  {"AC15", false, ac15},
    };

    int unexpected = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        if (only.empty() && ((suite == "fast" && c.slow) || (suite == "slow" && !c.slow))) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool known = expected.count(c.id) > 0;
        std::string tag = o.pass ? "PASS" : "FAIL";
        if (!o.pass && known) tag += " (expected)";
        if (o.pass && known) tag += " (listed as expected failure)";
        std::cout << fmt::format("{:<5} {} {} [{:.1f} s]", c.id, tag, o.detail, secs) << std::endl;
        if (!o.pass && !known) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
