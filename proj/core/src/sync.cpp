#include "twomem/sync.hpp"

#include <cmath>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "twomem/constants.hpp"
#include "twomem/errors.hpp"
#include "twomem/parallel.hpp"

namespace twomem {

namespace {

constexpr double kMinSamplesPerPeriod = 20.0;

bool in_window(double t, double t_s, double window) {
    const double eps = 1e-9 * std::max(std::abs(t_s) + window, 1e-300);
    return t >= t_s - eps && t <= t_s + window + eps;
}

}  // namespace

// ---------------------------------------------------------------------------

SlidingMean::SlidingMean(double window, double sample_step) : window_(window), step_(sample_step) {
    if (!(window > 0.0) || !(sample_step > 0.0)) throw DomainError("sliding window and step must be positive");
    span_ = window / sample_step;
    ring_.resize(static_cast<std::size_t>(std::ceil(span_)) + 3);
}

void SlidingMean::reset() { count_ = 0; }

cplx SlidingMean::push(cplx value) {
    const std::size_t K = ring_.size();
    const std::uint64_t n = count_++;
    Entry e{value, {0.0, 0.0}};
    if (n > 0) {
        const Entry& prev = ring_[(n - 1) % K];
        e.integral = prev.integral + 0.5 * step_ * (prev.value + value);
    }
    ring_[n % K] = e;
    if (n == 0) return value;
    const double elapsed = static_cast<double>(n) * step_;
    if (elapsed < window_) return e.integral / elapsed;

    // integral of the piecewise-linear signal up to t_n - window
    const double pos = static_cast<double>(n) - span_;
    const auto k = static_cast<std::uint64_t>(std::floor(pos));
    const double u = (pos - static_cast<double>(k)) * step_;
    const Entry& lo = ring_[k % K];
    const Entry& hi = ring_[(k + 1) % K];
    const cplx start = lo.integral + lo.value * u + (hi.value - lo.value) * (u * u / (2.0 * step_));
    return (e.integral - start) / window_;
}

// ---------------------------------------------------------------------------

EnvelopeTracker::EnvelopeTracker(double omega_bar, double sample_dt, const DemodulationOptions& options)
    : omega_bar_(omega_bar),
      offset1_(options.smoothing_periods * kTwoPi / omega_bar, sample_dt),
      offset2_(options.smoothing_periods * kTwoPi / omega_bar, sample_dt),
      smooth1_(options.envelope_periods * kTwoPi / omega_bar, sample_dt),
      smooth2_(options.envelope_periods * kTwoPi / omega_bar, sample_dt) {
    const double per_period = kTwoPi / omega_bar / sample_dt;
    if (per_period < kMinSamplesPerPeriod)
        throw SamplingTooCoarse(
            fmt::format("{:.3g} samples per mechanical period; at least {} required", per_period, kMinSamplesPerPeriod));
}

EnvelopeTracker::Sample EnvelopeTracker::push(const SystemState& s) {
    const cplx b1(s.q1, s.p1);
    const cplx b2(s.q2, s.p2);
    const cplx b01 = offset1_.push(b1);
    const cplx b02 = offset2_.push(b2);
    const cplx rot = std::polar(1.0, omega_bar_ * s.t);
    return {s.t, smooth1_.push((b1 - b01) * rot), smooth2_.push((b2 - b02) * rot), b01, b02};
}

Envelope demodulate(const Trajectory& trajectory, double omega_bar, const DemodulationOptions& options) {
    const auto& samples = trajectory.samples;
    if (samples.size() < 2) throw SamplingTooCoarse("trajectory needs at least two samples");
    const double dt = samples[1].t - samples[0].t;
    if (!(dt > 0.0)) throw SamplingTooCoarse("trajectory samples must be increasing in time");
    EnvelopeTracker tracker(omega_bar, dt, options);

    Envelope env;
    const std::size_t n = samples.size();
    env.t.reserve(n);
    env.A1.reserve(n);
    env.A2.reserve(n);
    env.b01.reserve(n);
    env.b02.reserve(n);
    for (const auto& s : samples) {
        const auto e = tracker.push(s);
        env.t.push_back(e.t);
        env.A1.push_back(e.A1);
        env.A2.push_back(e.A2);
        env.b01.push_back(e.b01);
        env.b02.push_back(e.b02);
    }
    auto unwrap = [](const std::vector<cplx>& A) {
        std::vector<double> out(A.size());
        double offset = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) {
            const double raw = std::arg(A[i]);
            if (i > 0) {
                const double jump = raw + offset - out[i - 1];
                offset -= kTwoPi * std::round(jump / kTwoPi);
            }
            out[i] = raw + offset;
        }
        return out;
    };
    env.theta1 = unwrap(env.A1);
    env.theta2 = unwrap(env.A2);
    return env;
}

Envelope demodulate(const Trajectory& trajectory, double omega_bar, double smoothing_periods) {
    DemodulationOptions options;
    options.smoothing_periods = smoothing_periods;
    return demodulate(trajectory, omega_bar, options);
}

// ---------------------------------------------------------------------------

void SyncAccumulator::add(double t, cplx A1, cplx A2) {
    if (!in_window(t, t_s_, window_)) return;
    ++n_;
    sum1_ += std::abs(A1);
    sum2_ += std::abs(A2);
    const double P = std::cos(std::arg(A1) - std::arg(A2));
    sumP_ += P;
    sumP2_ += P * P;
}

SyncReport SyncAccumulator::report() const {
    SyncReport r;
    r.t_s = t_s_;
    r.window = window_;
    r.samples = n_;
    if (n_ == 0) throw DomainError("analysis window contains no samples");
    const double n = static_cast<double>(n_);
    r.P_mean = sumP_ / n;
    r.P_var = std::max(0.0, sumP2_ / n - r.P_mean * r.P_mean);
    if (!(sum1_ > 0.0) || !(sum2_ > 0.0)) {
        r.zero_amplitude = true;
        if (sum1_ > 0.0)
            r.Rc = std::numeric_limits<double>::infinity();
        else if (sum2_ > 0.0)
            r.Rc = -std::numeric_limits<double>::infinity();
        else
            r.Rc = std::numeric_limits<double>::quiet_NaN();
    } else {
        r.Rc = std::log10(sum1_ / sum2_);
    }
    return r;
}

double mode_competition(const Envelope& env, double t_s, double window, bool* zero_amplitude) {
    SyncAccumulator acc(t_s, window);
    for (std::size_t i = 0; i < env.t.size(); ++i) acc.add(env.t[i], env.A1[i], env.A2[i]);
    const SyncReport r = acc.report();
    if (zero_amplitude) *zero_amplitude = r.zero_amplitude;
    return r.Rc;
}

SyncMeasures sync_measures(const Envelope& env, double t_s, double window) {
    SyncAccumulator acc(t_s, window);
    for (std::size_t i = 0; i < env.t.size(); ++i) acc.add(env.t[i], env.A1[i], env.A2[i]);
    const SyncReport r = acc.report();
    return {r.P_mean, r.P_var};
}

// ---------------------------------------------------------------------------

SyncReport run_sync(const DynamicsModel& model, const SyncSchedule& schedule) {
    if (!(schedule.tau_window > 0.0) || !(schedule.tau_start >= 0.0))
        throw DomainError("sync schedule needs tau_start >= 0 and tau_window > 0");
    const double wb = model.omega_bar();
    const double sample_dt = static_cast<double>(schedule.stride) * schedule.dtau / wb;
    EnvelopeTracker tracker(wb, sample_dt, schedule.demod);
    SyncAccumulator acc(schedule.tau_start / wb, schedule.tau_window / wb);

    SystemState s0;
    s0.q1 = schedule.seed_q;
    s0.q2 = schedule.seed_q;
    if (schedule.seed_reference > 0.0) {
        const auto& c = model.couplings();
        if (c.g1 == 0.0 || c.g2 == 0.0) throw DomainError("seed scaling needs nonzero couplings");
        s0.q1 = schedule.seed_q * schedule.seed_reference / c.g1;
        s0.q2 = schedule.seed_q * schedule.seed_reference / c.g2;
    }

    IntegratorOptions opts;
    opts.dtau = schedule.dtau;
    opts.tau_end = schedule.tau_start + schedule.tau_window;
    opts.stride = schedule.stride;
    propagate(model, s0, NoiseSpec{}, opts, [&](const SystemState& s) {
        const auto e = tracker.push(s);
        acc.add(e.t, e.A1, e.A2);
    });
    return acc.report();
}

PhaseDiagram sweep_phase_diagram(const PhysicalParams& params, double Q1, double Q2, const std::vector<double>& deltas,
                                 const std::vector<double>& powers, double Delta_prime, ModelTier tier,
                                 const SyncSchedule& schedule, unsigned workers) {
    PhaseDiagram out;
    out.deltas = deltas;
    out.powers = powers;
    out.tier = tier;
    const std::size_t n = deltas.size() * powers.size();
    out.cells.resize(n);
    out.valid.assign(n, 0);
    const double omega_bar = params.omega_bar();

    parallel_for(n, workers, [&](std::size_t idx) {
        const std::size_t i = idx / powers.size();
        const std::size_t j = idx % powers.size();
        try {
            PhysicalParams p = params;
            set_mechanical_frequencies(p, omega_bar, deltas[i]);
            p = with_shifted_detuning(p, Q1, Q2, Delta_prime);
            const CouplingSet c = coupling_coefficients(p, Q1, Q2);
            const DynamicsModel model(p, Q1, Q2, c, DriveSpec::from_power(powers[j], p), tier);
            out.cells[idx] = run_sync(model, schedule);
            out.valid[idx] = 1;
        } catch (const NonFiniteError&) {
        } catch (const DomainError&) {
        }
    });
    return out;
}

double equalize_couplings(const PhysicalParams& params, double Q1, double Q2, double half_width) {
    auto mismatch = [&](double q2) {
        const auto g = Placement(params, Q1, q2).gradient(0.0, 0.0);
        return std::abs(g.L1) - std::abs(g.L2);
    };
    const double f0 = mismatch(Q2);
    if (f0 == 0.0) return Q2;
    // Walk outwards from Q2 until |g1| - |g2| changes sign.
    constexpr int kProbe = 200;
    for (int k = 1; k <= kProbe; ++k) {
        const double d = half_width * k / kProbe;
        for (double sign : {1.0, -1.0}) {
            const double a = Q2 + sign * (d - half_width / kProbe);
            const double b = Q2 + sign * d;
            const double fa = mismatch(a), fb = mismatch(b);
            if (fa == 0.0) return a;
            if ((fa < 0.0) != (fb < 0.0)) {
                std::uintmax_t iterations = 200;
                const auto [lo, hi] = boost::math::tools::toms748_solve(
                    mismatch, std::min(a, b), std::max(a, b), sign > 0 ? fa : fb, sign > 0 ? fb : fa,
                    boost::math::tools::eps_tolerance<double>(48), iterations);
                return 0.5 * (lo + hi);
            }
        }
    }
    throw DomainError(fmt::format("no placement with |g1| = |g2| within {} m of Q2 = {} m", half_width, Q2));
}

std::vector<DriveCurvePoint> sweep_drive_curve(const PhysicalParams& params, double Q1, double Q2,
                                               const std::vector<double>& x_values, double Delta_prime,
                                               ModelTier tier, const SyncSchedule& schedule, unsigned workers) {
    const PhysicalParams p = with_shifted_detuning(params, Q1, Q2, Delta_prime);
    const CouplingSet c = coupling_coefficients(p, Q1, Q2);
    if (c.g1 == 0.0) throw DomainError("drive curve needs a nonzero linear coupling");
    const double wb = p.omega_bar();
    std::vector<DriveCurvePoint> out(x_values.size());
    parallel_for(x_values.size(), workers, [&](std::size_t i) {
        auto& pt = out[i];
        pt.x = x_values[i];
        pt.E = pt.x * wb * wb / std::abs(c.g1);
        try {
            const DynamicsModel model(p, Q1, Q2, c, DriveSpec::single_tone(pt.E), tier);
            pt.report = run_sync(model, schedule);
            pt.valid = true;
        } catch (const NonFiniteError&) {
        } catch (const DomainError&) {
        }
    });
    return out;
}

}  // namespace twomem
