#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string_view>
#include <vector>

#include "twomem/model.hpp"

namespace twomem {

using cplx = std::complex<double>;

/// Mechanical quadratures, cavity amplitude and time (seconds).
struct SystemState {
    double q1 = 0.0, p1 = 0.0, q2 = 0.0, p2 = 0.0;
    cplx a{0.0, 0.0};
    double t = 0.0;

    std::array<double, 6> components() const { return {q1, p1, q2, p2, a.real(), a.imag()}; }
    bool finite() const;
};

/// d/dt of a SystemState, in 1/s.
struct StateDerivative {
    double q1 = 0.0, p1 = 0.0, q2 = 0.0, p2 = 0.0;
    cplx a{0.0, 0.0};
};

enum class ModelTier { FirstOrder, SecondOrder, Full };

const char* tier_name(ModelTier tier);
ModelTier parse_tier(std::string_view name);

/// Coherent drive in the frame rotating at the laser frequency. Rates in rad/s.
/// Two-tone drive adds E1 exp(-i omega1 t) + E2 exp(+i omega2 t).
struct DriveSpec {
    enum class Kind { SingleTone, TwoTone };
    Kind kind = Kind::SingleTone;
    double E = 0.0;
    double E1 = 0.0, E2 = 0.0;

    static DriveSpec single_tone(double E) { return {Kind::SingleTone, E, 0.0, 0.0}; }
    static DriveSpec two_tone(double E1, double E2) { return {Kind::TwoTone, 0.0, E1, E2}; }
    /// Single tone with E = sqrt(2 P kappa_in / (hbar omega_c)).
    static DriveSpec from_power(double power, const PhysicalParams& params);
    /// Two tones sized so that each alone gives |g_j alpha_j| = G_j, where
    /// alpha_j is the linear cavity response at detuning Delta'. G_j in rad/s.
    static DriveSpec from_sideband_rates(double G1, double G2, const PhysicalParams& params,
                                         const CouplingSet& couplings);

    cplx amplitude(double t, const PhysicalParams& params) const;
};

/// sqrt(2 P kappa_in / (hbar omega_c)).
double drive_rate_from_power(double power, double kappa_in, double omega_c);

/// Thermal occupancies come from PhysicalParams; this only switches noise on
/// and identifies the random stream.
struct NoiseSpec {
    bool enabled = false;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

struct NoiseIncrement {
    cplx da_in{0.0, 0.0};
    double dW1 = 0.0, dW2 = 0.0;
};

/// Per-trajectory Gaussian source. The engine is seeded from
/// (seed, stream) through std::seed_seq, so distinct streams never share state.
class NoiseSource {
public:
    NoiseSource(std::uint64_t seed, std::uint64_t stream);
    double normal() { return dist_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_;
};

/// Increments over a step dt (seconds):
/// Re/Im of da_in each N(0, (nbar_a + 1/2) dt / 2), so <|da_in|^2> = (nbar_a + 1/2) dt;
/// dW_j ~ N(0, 2 gamma_j (nbar_j + 1/2) dt). The cavity increment enters a as sqrt(2 kappa) da_in.
NoiseIncrement noise_increments(const NoiseSpec& noise, const PhysicalParams& params, double dt, NoiseSource& rng);

/// Coefficient c in the force (|a|^2 - c); 1/2 for symmetric ordering.
inline constexpr double kSymmetricOrdering = 0.5;

StateDerivative drift_full(const SystemState& state, const Placement& placement, const PhysicalParams& params,
                           const CouplingSet& couplings, const DriveSpec& drive,
                           double ordering = kSymmetricOrdering);
StateDerivative drift_first_order(const SystemState& state, const PhysicalParams& params,
                                  const CouplingSet& couplings, const DriveSpec& drive,
                                  double ordering = kSymmetricOrdering);
StateDerivative drift_second_order(const SystemState& state, const PhysicalParams& params,
                                   const CouplingSet& couplings, const DriveSpec& drive,
                                   double ordering = kSymmetricOrdering);

/// Equations of motion of one tier in dimensionless time tau = omega_bar t.
/// Every rate is divided by omega_bar once at construction.
class DynamicsModel {
public:
    using Vector = std::array<double, 6>;  // q1, p1, q2, p2, Re a, Im a

    DynamicsModel(const PhysicalParams& params, double Q1, double Q2, const CouplingSet& couplings,
                  const DriveSpec& drive, ModelTier tier, double ordering = kSymmetricOrdering);

    Vector drift(double tau, const Vector& u) const;

    ModelTier tier() const noexcept { return tier_; }
    double omega_bar() const noexcept { return omega_bar_; }
    const PhysicalParams& params() const noexcept { return params_; }
    const CouplingSet& couplings() const noexcept { return couplings_; }

    /// Noise amplitudes per unit sqrt(dtau): cavity quadrature std per component,
    /// mechanical momentum std for each resonator.
    double cavity_noise_scale() const noexcept { return cavity_noise_; }
    double mech_noise_scale1() const noexcept { return mech_noise1_; }
    double mech_noise_scale2() const noexcept { return mech_noise2_; }

private:
    PhysicalParams params_;
    CouplingSet couplings_;
    DriveSpec drive_;
    ModelTier tier_;
    Placement placement_;
    double omega_bar_;
    double w1_, w2_, g1d_, g2d_, kappa_, delta_p_;
    double g1_, g2_, g12_, g22_, gt_;
    double E_, E1_, E2_, tone1_, tone2_;
    double ordering_;
    double cavity_noise_, mech_noise1_, mech_noise2_;
};

SystemState to_state(const DynamicsModel::Vector& u, double tau, double omega_bar);
DynamicsModel::Vector to_vector(const SystemState& s);

struct IntegratorOptions {
    double dtau = 0.005;
    double tau_end = 0.0;
    /// Observer is called on the initial state and every `stride` steps.
    std::size_t stride = 1;
};

using Observer = std::function<void(const SystemState&)>;

/// Fixed-step integration from state0 (its t is the start time). Stochastic
/// Heun when noise is enabled, classical RK4 otherwise. Throws NonFiniteError
/// if the state blows up and propagates DomainError from the model.
SystemState propagate(const DynamicsModel& model, SystemState state0, const NoiseSpec& noise,
                      const IntegratorOptions& options, const Observer& observer = {});

struct Trajectory {
    std::vector<SystemState> samples;
    double omega_bar = 0.0;
};

Trajectory integrate(const DynamicsModel& model, const SystemState& state0, const NoiseSpec& noise,
                     const IntegratorOptions& options);

}  // namespace twomem
