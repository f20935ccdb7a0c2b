#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "twomem/dynamics.hpp"

namespace twomem {

/// Trailing mean over a fixed time window of a uniformly sampled complex
/// signal. The window integral comes from the cumulative trapezoid integral,
/// interpolated at the (generally fractional) window start, so windows that
/// are not a whole number of samples long are handled exactly for piecewise
/// linear signals. Before a full window is available the mean covers the
/// elapsed time.
class SlidingMean {
public:
    SlidingMean(double window, double sample_step);

    /// Adds the next sample and returns the current window mean.
    cplx push(cplx value);
    void reset();
    std::uint64_t count() const noexcept { return count_; }

private:
    struct Entry {
        cplx value;
        cplx integral;
    };
    double window_;
    double step_;
    double span_;  // window in samples
    std::vector<Entry> ring_;
    std::uint64_t count_ = 0;
};

/// Slow amplitudes A_j(t) of b_j = q_j + i p_j = b0_j + A_j exp(-i omega_bar t).
struct Envelope {
    std::vector<double> t;
    std::vector<cplx> A1, A2;
    std::vector<cplx> b01, b02;
    /// Unwrapped arg A_j.
    std::vector<double> theta1, theta2;
};

struct DemodulationOptions {
    /// b0 is the trailing mean of b over this many mechanical periods.
    double smoothing_periods = 10.0;
    /// A_j is smoothed by a trailing mean over this many periods.
    double envelope_periods = 1.0;
};

/// Streaming form of demodulate(); feeds one sample at a time and keeps only
/// the window history.
class EnvelopeTracker {
public:
    EnvelopeTracker(double omega_bar, double sample_dt, const DemodulationOptions& options = {});

    struct Sample {
        double t;
        cplx A1, A2, b01, b02;
    };
    Sample push(const SystemState& s);

private:
    double omega_bar_;
    SlidingMean offset1_, offset2_, smooth1_, smooth2_;
};

/// Requires uniformly spaced samples with at least 20 per 2 pi / omega_bar;
/// throws SamplingTooCoarse otherwise.
Envelope demodulate(const Trajectory& trajectory, double omega_bar, const DemodulationOptions& options = {});
Envelope demodulate(const Trajectory& trajectory, double omega_bar, double smoothing_periods);

struct SyncReport {
    double Rc = 0.0;
    double P_mean = 0.0;
    double P_var = 0.0;
    double t_s = 0.0;
    double window = 0.0;
    std::size_t samples = 0;
    /// Set when an envelope integral vanished; Rc is then +-inf.
    bool zero_amplitude = false;
};

/// log10(int |A1| / int |A2|) over [t_s, t_s + window].
double mode_competition(const Envelope& env, double t_s, double window, bool* zero_amplitude = nullptr);

struct SyncMeasures {
    double P_mean = 0.0;
    double P_var = 0.0;
};
/// Time mean and variance of cos(theta1 - theta2) over [t_s, t_s + window].
SyncMeasures sync_measures(const Envelope& env, double t_s, double window);

/// Accumulates the window statistics while a trajectory streams past.
class SyncAccumulator {
public:
    SyncAccumulator(double t_s, double window) : t_s_(t_s), window_(window) {}
    void add(double t, cplx A1, cplx A2);
    SyncReport report() const;

private:
    double t_s_, window_;
    std::size_t n_ = 0;
    double sum1_ = 0.0, sum2_ = 0.0;
    double sumP_ = 0.0, sumP2_ = 0.0;
};

/// Integration and analysis schedule for noiseless sync runs, in tau = omega_bar t.
struct SyncSchedule {
    double tau_start = 2.0e6;
    double tau_window = 5.0e5;
    double dtau = 0.005;
    std::size_t stride = 10;
    DemodulationOptions demod;
    /// Initial displacement q1 = q2 = seed_q (p = 0, a = 0).
    double seed_q = 1.0;
    /// If positive, the seed becomes seed_q * seed_reference / g_j so that
    /// placements related by the drive-coupling rescaling start from
    /// correspondingly rescaled states.
    double seed_reference = 0.0;
};

/// One noiseless run of the given model, analysed on the fly.
SyncReport run_sync(const DynamicsModel& model, const SyncSchedule& schedule);

struct PhaseDiagram {
    std::vector<double> deltas;  ///< mechanical splitting omega2 - omega1, rad/s
    std::vector<double> powers;  ///< input power, W
    ModelTier tier = ModelTier::Full;
    std::vector<SyncReport> cells;  ///< row-major, delta index outer
    std::vector<std::uint8_t> valid;
};

/// Sweeps (delta, power) at fixed placement and fixed omega_bar. The drive
/// detuning from the shifted resonance is Delta_prime at every cell; the
/// couplings are recomputed per delta because chi_zpf depends on omega_j.
PhaseDiagram sweep_phase_diagram(const PhysicalParams& params, double Q1, double Q2, const std::vector<double>& deltas,
                                 const std::vector<double>& powers, double Delta_prime, ModelTier tier,
                                 const SyncSchedule& schedule, unsigned workers = 0);

/// Finds Q2 within [Q2 - half_width, Q2 + half_width] where |g1| = |g2| (lengths
/// in metres). The signs are left alone: with both q_j measured along the cavity
/// axis, neighbouring placements often have g1 = -g2. Throws DomainError when no
/// sign change of |g1| - |g2| is bracketed.
double equalize_couplings(const PhysicalParams& params, double Q1, double Q2, double half_width);

struct DriveCurvePoint {
    double x = 0.0;  ///< E g / omega_bar^2
    double E = 0.0;
    bool valid = false;
    SyncReport report;
};

/// Drive sweep at one placement with E = x omega_bar^2 / g, g taken as |g1|.
std::vector<DriveCurvePoint> sweep_drive_curve(const PhysicalParams& params, double Q1, double Q2,
                                               const std::vector<double>& x_values, double Delta_prime,
                                               ModelTier tier, const SyncSchedule& schedule, unsigned workers = 0);

}  // namespace twomem
