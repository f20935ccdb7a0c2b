#include "twomem/dynamics.hpp"

#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "twomem/constants.hpp"
#include "twomem/errors.hpp"

namespace twomem {

namespace {

// Common right-hand side once the tier-specific force and detuning are known.
// All rates in the same time unit as the returned derivative.
struct Rates {
    double w1, w2, g1d, g2d, kappa;
};

StateDerivative assemble(const SystemState& s, const Rates& r, double force1, double force2, double detuning,
                         cplx drive, double ordering) {
    const double photons = std::norm(s.a) - ordering;
    StateDerivative d;
    d.q1 = r.w1 * s.p1;
    d.p1 = -r.w1 * s.q1 - r.g1d * s.p1 + force1 * photons;
    d.q2 = r.w2 * s.p2;
    d.p2 = -r.w2 * s.q2 - r.g2d * s.p2 + force2 * photons;
    d.a = cplx(-r.kappa, detuning) * s.a + drive;
    return d;
}

Rates physical_rates(const PhysicalParams& p) { return {p.omega1, p.omega2, p.gamma1, p.gamma2, p.kappa()}; }

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

bool SystemState::finite() const {
    for (double v : components())
        if (!std::isfinite(v)) return false;
    return true;
}

const char* tier_name(ModelTier tier) {
    switch (tier) {
        case ModelTier::FirstOrder: return "first_order";
        case ModelTier::SecondOrder: return "second_order";
        case ModelTier::Full: return "full";
    }
    return "unknown";
}

ModelTier parse_tier(std::string_view name) {
    if (name == "first_order" || name == "first") return ModelTier::FirstOrder;
    if (name == "second_order" || name == "second") return ModelTier::SecondOrder;
    if (name == "full") return ModelTier::Full;
    throw ConfigError(fmt::format("unknown model tier '{}' (expected first_order, second_order or full)", name));
}

double drive_rate_from_power(double power, double kappa_in, double omega_c) {
    if (!(power >= 0.0)) throw DomainError("input power must be non-negative");
    if (!(kappa_in > 0.0) || !(omega_c > 0.0)) throw DomainError("kappa_in and omega_c must be positive");
    return std::sqrt(2.0 * power * kappa_in / (kHbar * omega_c));
}

DriveSpec DriveSpec::from_power(double power, const PhysicalParams& params) {
    return single_tone(drive_rate_from_power(power, params.kappa_in, params.omega_laser()));
}

DriveSpec DriveSpec::from_sideband_rates(double G1, double G2, const PhysicalParams& params,
                                         const CouplingSet& couplings) {
    if (!(G1 >= 0.0) || !(G2 >= 0.0)) throw DomainError("sideband rates must be non-negative");
    if (couplings.g1 == 0.0 || couplings.g2 == 0.0) throw DomainError("sideband rates need non-zero linear couplings");
    const double k = params.kappa();
    // E1 exp(-i w1 t) settles to E1 / (k - i(D' + w1)); E2 exp(i w2 t) to E2 / (k - i(D' - w2))
    const double r1 = std::hypot(k, couplings.Delta_prime + params.omega1);
    const double r2 = std::hypot(k, couplings.Delta_prime - params.omega2);
    return two_tone(G1 * r1 / std::abs(couplings.g1), G2 * r2 / std::abs(couplings.g2));
}

cplx DriveSpec::amplitude(double t, const PhysicalParams& params) const {
    if (kind == Kind::SingleTone) return {E, 0.0};
    return E1 * std::polar(1.0, -params.omega1 * t) + E2 * std::polar(1.0, params.omega2 * t);
}

NoiseSource::NoiseSource(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{lo32(seed), hi32(seed), lo32(stream), hi32(stream)};
    engine_.seed(seq);
}

NoiseIncrement noise_increments(const NoiseSpec& noise, const PhysicalParams& params, double dt, NoiseSource& rng) {
    if (!(dt > 0.0)) throw DomainError("time step must be positive");
    NoiseIncrement inc;
    if (!noise.enabled) return inc;
    const double sa = std::sqrt((params.nbar_a + 0.5) * dt / 2.0);
    const double re = sa * rng.normal();
    const double im = sa * rng.normal();
    inc.da_in = {re, im};
    inc.dW1 = std::sqrt(2.0 * params.gamma1 * (params.nbar_1 + 0.5) * dt) * rng.normal();
    inc.dW2 = std::sqrt(2.0 * params.gamma2 * (params.nbar_2 + 0.5) * dt) * rng.normal();
    return inc;
}

StateDerivative drift_full(const SystemState& state, const Placement& placement, const PhysicalParams& params,
                           const CouplingSet& couplings, const DriveSpec& drive, double ordering) {
    const auto grad = placement.gradient(state.q1, state.q2);
    const double pull = placement.shift_change(state.q1, state.q2);
    return assemble(state, physical_rates(params), grad.L1, grad.L2, couplings.Delta_prime - pull,
                    drive.amplitude(state.t, params), ordering);
}

StateDerivative drift_first_order(const SystemState& state, const PhysicalParams& params,
                                  const CouplingSet& couplings, const DriveSpec& drive, double ordering) {
    const double detuning = couplings.Delta_prime + couplings.g1 * state.q1 + couplings.g2 * state.q2;
    return assemble(state, physical_rates(params), couplings.g1, couplings.g2, detuning,
                    drive.amplitude(state.t, params), ordering);
}

StateDerivative drift_second_order(const SystemState& state, const PhysicalParams& params,
                                   const CouplingSet& c, const DriveSpec& drive, double ordering) {
    const double q1 = state.q1, q2 = state.q2;
    const double detuning = c.Delta_prime + c.g1 * q1 + c.g2 * q2 - 0.5 * c.g12 * q1 * q1 - 0.5 * c.g22 * q2 * q2 -
                            c.gt * q1 * q2;
    const double f1 = c.g1 - c.g12 * q1 - c.gt * q2;
    const double f2 = c.g2 - c.g22 * q2 - c.gt * q1;
    return assemble(state, physical_rates(params), f1, f2, detuning, drive.amplitude(state.t, params), ordering);
}

// ---------------------------------------------------------------------------

DynamicsModel::DynamicsModel(const PhysicalParams& params, double Q1, double Q2, const CouplingSet& couplings,
                             const DriveSpec& drive, ModelTier tier, double ordering)
    : params_(params),
      couplings_(couplings),
      drive_(drive),
      tier_(tier),
      placement_(params, Q1, Q2),
      omega_bar_(params.omega_bar()),
      ordering_(ordering) {
    const double s = 1.0 / omega_bar_;
    w1_ = params.omega1 * s;
    w2_ = params.omega2 * s;
    g1d_ = params.gamma1 * s;
    g2d_ = params.gamma2 * s;
    kappa_ = params.kappa() * s;
    delta_p_ = couplings.Delta_prime * s;
    g1_ = couplings.g1 * s;
    g2_ = couplings.g2 * s;
    g12_ = couplings.g12 * s;
    g22_ = couplings.g22 * s;
    gt_ = couplings.gt * s;
    E_ = drive.kind == DriveSpec::Kind::SingleTone ? drive.E * s : 0.0;
    E1_ = drive.E1 * s;
    E2_ = drive.E2 * s;
    tone1_ = params.omega1 * s;
    tone2_ = params.omega2 * s;
    cavity_noise_ = std::sqrt(2.0 * kappa_ * (params.nbar_a + 0.5) / 2.0);
    mech_noise1_ = std::sqrt(2.0 * g1d_ * (params.nbar_1 + 0.5));
    mech_noise2_ = std::sqrt(2.0 * g2d_ * (params.nbar_2 + 0.5));
}

DynamicsModel::Vector DynamicsModel::drift(double tau, const Vector& u) const {
    const double q1 = u[0], p1 = u[1], q2 = u[2], p2 = u[3], ar = u[4], ai = u[5];
    double f1, f2, det;
    switch (tier_) {
        case ModelTier::FirstOrder:
            f1 = g1_;
            f2 = g2_;
            det = delta_p_ + g1_ * q1 + g2_ * q2;
            break;
        case ModelTier::SecondOrder:
            f1 = g1_ - g12_ * q1 - gt_ * q2;
            f2 = g2_ - g22_ * q2 - gt_ * q1;
            det = delta_p_ + g1_ * q1 + g2_ * q2 - 0.5 * g12_ * q1 * q1 - 0.5 * g22_ * q2 * q2 - gt_ * q1 * q2;
            break;
        case ModelTier::Full:
        default: {
            const auto grad = placement_.gradient(q1, q2);
            const double s = 1.0 / omega_bar_;
            f1 = grad.L1 * s;
            f2 = grad.L2 * s;
            det = delta_p_ - placement_.shift_change(q1, q2) * s;
            break;
        }
    }
    const double photons = ar * ar + ai * ai - ordering_;
    double dr = E_, di = 0.0;
    if (drive_.kind == DriveSpec::Kind::TwoTone) {
        const double c1 = std::cos(tone1_ * tau), s1 = std::sin(tone1_ * tau);
        const double c2 = std::cos(tone2_ * tau), s2 = std::sin(tone2_ * tau);
        dr = E1_ * c1 + E2_ * c2;
        di = -E1_ * s1 + E2_ * s2;
    }
    return {w1_ * p1,
            -w1_ * q1 - g1d_ * p1 + f1 * photons,
            w2_ * p2,
            -w2_ * q2 - g2d_ * p2 + f2 * photons,
            -kappa_ * ar - det * ai + dr,
            det * ar - kappa_ * ai + di};
}

SystemState to_state(const DynamicsModel::Vector& u, double tau, double omega_bar) {
    return {u[0], u[1], u[2], u[3], cplx(u[4], u[5]), tau / omega_bar};
}

DynamicsModel::Vector to_vector(const SystemState& s) { return {s.q1, s.p1, s.q2, s.p2, s.a.real(), s.a.imag()}; }

SystemState propagate(const DynamicsModel& model, SystemState state0, const NoiseSpec& noise,
                      const IntegratorOptions& options, const Observer& observer) {
    using V = DynamicsModel::Vector;
    if (!(options.dtau > 0.0)) throw DomainError("integration step must be positive");
    if (!(options.tau_end >= 0.0)) throw DomainError("integration horizon must be non-negative");
    if (options.stride < 1) throw DomainError("observer stride must be >= 1");

    const double wb = model.omega_bar();
    const double h = options.dtau;
    const double tau0 = state0.t * wb;
    const auto steps = static_cast<std::uint64_t>(std::llround(options.tau_end / h));
    V u = to_vector(state0);
    if (observer) observer(to_state(u, tau0, wb));

    auto axpy = [](const V& x, double a, const V& y) {
        V r;
        for (std::size_t i = 0; i < 6; ++i) r[i] = x[i] + a * y[i];
        return r;
    };

    std::optional<NoiseSource> rng;
    double sc = 0.0, s1 = 0.0, s2 = 0.0;
    if (noise.enabled) {
        rng.emplace(noise.seed, noise.stream);
        const double root = std::sqrt(h);
        sc = model.cavity_noise_scale() * root;
        s1 = model.mech_noise_scale1() * root;
        s2 = model.mech_noise_scale2() * root;
    }

    for (std::uint64_t n = 0; n < steps; ++n) {
        const double tau = tau0 + static_cast<double>(n) * h;
        if (rng) {
            const double wr = sc * rng->normal();
            const double wi = sc * rng->normal();
            const double w1 = s1 * rng->normal();
            const double w2 = s2 * rng->normal();
            const V dW{0.0, w1, 0.0, w2, wr, wi};
            const V k1 = model.drift(tau, u);
            V pred;
            for (std::size_t i = 0; i < 6; ++i) pred[i] = u[i] + h * k1[i] + dW[i];
            const V k2 = model.drift(tau + h, pred);
            for (std::size_t i = 0; i < 6; ++i) u[i] += 0.5 * h * (k1[i] + k2[i]) + dW[i];
        } else {
            const V k1 = model.drift(tau, u);
            const V k2 = model.drift(tau + 0.5 * h, axpy(u, 0.5 * h, k1));
            const V k3 = model.drift(tau + 0.5 * h, axpy(u, 0.5 * h, k2));
            const V k4 = model.drift(tau + h, axpy(u, h, k3));
            for (std::size_t i = 0; i < 6; ++i) u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        bool ok = true;
        for (double v : u) ok = ok && std::isfinite(v);
        const double tau_next = tau0 + static_cast<double>(n + 1) * h;
        if (!ok) throw NonFiniteError(tau_next / wb, u);
        if (observer && (n + 1) % options.stride == 0) observer(to_state(u, tau_next, wb));
    }
    return to_state(u, tau0 + static_cast<double>(steps) * h, wb);
}

Trajectory integrate(const DynamicsModel& model, const SystemState& state0, const NoiseSpec& noise,
                     const IntegratorOptions& options) {
    Trajectory traj;
    traj.omega_bar = model.omega_bar();
    traj.samples.reserve(static_cast<std::size_t>(options.tau_end / options.dtau / options.stride) + 2);
    propagate(model, state0, noise, options, [&](const SystemState& s) { traj.samples.push_back(s); });
    return traj;
}

}  // namespace twomem
