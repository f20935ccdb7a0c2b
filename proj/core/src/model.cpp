#include "twomem/model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <fmt/format.h>

#include "twomem/constants.hpp"
#include "twomem/digest.hpp"
#include "twomem/errors.hpp"

namespace twomem {

namespace {

constexpr double kFExcessTolerance = 1e-12;
constexpr double kArcsinSingularity = 1e-9;
constexpr double kMixedAsymmetry = 1e-6;

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value))
        throw DomainError(fmt::format("{} must be positive and finite (got {})", name, value));
}

void require_non_negative(double value, const char* name) {
    if (!(value >= 0.0) || !std::isfinite(value))
        throw DomainError(fmt::format("{} must be non-negative (got {})", name, value));
}

}  // namespace

double PhysicalParams::chi_zpf1() const { return zero_point_amplitude(mass1(), omega1); }
double PhysicalParams::chi_zpf2() const { return zero_point_amplitude(mass2(), omega2); }

double PhysicalParams::wave_number() const {
    require_positive(lambda, "lambda");
    return kTwoPi / lambda;
}

double PhysicalParams::omega_laser() const { return kSpeedOfLight * wave_number(); }

Reflectivity PhysicalParams::reflectivity() const {
    if (reflectivity_override) return *reflectivity_override;
    return membrane_reflectivity(n_refr, Lz, lambda);
}

void PhysicalParams::validate() const {
    require_positive(omega1, "omega1");
    require_positive(omega2, "omega2");
    require_positive(gamma1, "gamma1");
    require_positive(gamma2, "gamma2");
    require_positive(kappa_in, "kappa_in");
    require_non_negative(kappa_ex, "kappa_ex");
    if (!std::isfinite(Delta)) throw DomainError("Delta must be finite");
    if (!(n_refr >= 1.0)) throw DomainError(fmt::format("n_refr must be >= 1 (got {})", n_refr));
    require_positive(L, "L");
    require_positive(lambda, "lambda");
    require_positive(Lz, "Lz");
    require_positive(Lx1, "Lx1");
    require_positive(Ly1, "Ly1");
    require_positive(Lx2, "Lx2");
    require_positive(Ly2, "Ly2");
    require_positive(rho, "rho");
    require_non_negative(nbar_a, "nbar_a");
    require_non_negative(nbar_1, "nbar_1");
    require_non_negative(nbar_2, "nbar_2");
    if (reflectivity_override) {
        const auto& r = *reflectivity_override;
        if (!(r.R >= 0.0 && r.R < 1.0))
            throw DomainError(fmt::format("reflectivity override R must lie in [0, 1) (got {})", r.R));
        if (!std::isfinite(r.phi)) throw DomainError("reflectivity override phase must be finite");
    }
}

std::string PhysicalParams::canonical() const {
    std::string out = fmt::format(
        "omega1={} omega2={} gamma1={} gamma2={} kappa_in={} kappa_ex={} Delta={} n_refr={} L={} lambda={} "
        "Lz={} Lx1={} Ly1={} Lx2={} Ly2={} rho={} branch_l={} nbar_a={} nbar_1={} nbar_2={}",
        omega1, omega2, gamma1, gamma2, kappa_in, kappa_ex, Delta, n_refr, L, lambda, Lz, Lx1, Ly1, Lx2, Ly2, rho,
        branch_l, nbar_a, nbar_1, nbar_2);
    if (reflectivity_override)
        out += fmt::format(" R_override={} phi_override={}", reflectivity_override->R, reflectivity_override->phi);
    return out;
}

std::string PhysicalParams::digest() const { return to_hex(sha256(canonical())); }

PhysicalParams PhysicalParams::reference() {
    PhysicalParams p;
    set_mechanical_frequencies(p, angular(235.5e3), angular(1.0e3));
    p.gamma1 = angular(1.0);
    p.gamma2 = angular(10.0);
    p.kappa_in = angular(50.0e3);
    p.kappa_ex = angular(100.0e3);
    p.Delta = angular(235.5e3);
    p.n_refr = 2.17;
    p.L = 0.09;
    p.lambda = 1064e-9;
    p.Lz = 104e-9;
    p.Lx1 = 1.519e-3;
    p.Ly1 = 1.536e-3;
    p.Lx2 = 1.522e-3;
    p.Ly2 = 1.525e-3;
    p.rho = 3100.0;
    return p;
}

void set_mechanical_frequencies(PhysicalParams& params, double omega_bar, double delta) {
    params.omega1 = omega_bar - 0.5 * delta;
    params.omega2 = omega_bar + 0.5 * delta;
}

Reflectivity membrane_reflectivity(double n_refr, double Lz, double lambda) {
    if (!(n_refr >= 1.0)) throw DomainError(fmt::format("refractive index must be >= 1 (got {})", n_refr));
    require_positive(Lz, "membrane thickness");
    require_positive(lambda, "wavelength");
    const double phase = kTwoPi / lambda * n_refr * Lz;
    const double s = std::sin(phase);
    const double c = std::cos(phase);
    const std::complex<double> numerator((n_refr * n_refr - 1.0) * s, 0.0);
    const std::complex<double> denominator((n_refr * n_refr + 1.0) * s, 2.0 * n_refr * c);
    const std::complex<double> r = numerator / denominator;
    Reflectivity out;
    out.R = std::norm(r);
    out.phi = (out.R == 0.0) ? 0.0 : std::arg(r);
    return out;
}

double zero_point_amplitude(double mass, double omega) {
    require_positive(mass, "mass");
    require_positive(omega, "omega");
    return std::sqrt(kHbar / (mass * omega));
}

// ---------------------------------------------------------------------------
// Placement

struct Placement::Terms {
    SinCos sum, diff, diff2, diff4, a1, a2, a3, a4;
    double den = 1.0;
    double F = 0.0;
    double theta = 0.0;
};

Placement::SinCos Placement::rotation_delta(const SinCos& base, double increment) {
    if (increment == 0.0) return {0.0, 0.0};
    const double s = std::sin(increment);
    const double half = std::sin(0.5 * increment);
    const double cm1 = -2.0 * half * half;  // cos(increment) - 1 without cancellation
    return {base.s * cm1 + base.c * s, base.c * cm1 - base.s * s};
}

Placement::SinCos Placement::rotate(const SinCos& base, double increment) {
    const SinCos d = rotation_delta(base, increment);
    return {base.s + d.s, base.c + d.c};
}

Placement::Placement(const PhysicalParams& params, double Q1, double Q2)
    : Q1_(Q1), Q2_(Q2), refl_(params.reflectivity()) {
    params.validate();
    sqrtR_ = std::sqrt(refl_.R);
    k_ = params.wave_number();
    chi1_ = params.chi_zpf1();
    chi2_ = params.chi_zpf2();
    c_over_L_ = kSpeedOfLight / params.L;
    parity_ = params.branch_sign();

    const double u1 = k_ * Q1;
    const double u2 = k_ * Q2;
    const double phi = refl_.phi;
    const double d = u2 - u1 + phi;
    auto sc = [](double angle) { return SinCos{std::sin(angle), std::cos(angle)}; };
    sum_ = sc(u1 + u2);
    diff_ = sc(d);
    diff2_ = sc(2.0 * d);
    diff4_ = sc(4.0 * d);
    a1_ = sc(2.0 * u1 - phi);
    a2_ = sc(2.0 * u2 + phi);
    a3_ = sc(2.0 * (u1 - 2.0 * u2) - 3.0 * phi);
    a4_ = sc(2.0 * (u2 - 2.0 * u1) + 3.0 * phi);
}

Placement::Terms Placement::terms(double q1, double q2, bool with_gradient_terms) const {
    const double e1 = k_ * chi1_ * q1;
    const double e2 = k_ * chi2_ * q2;
    const double R = refl_.R;

    Terms t;
    t.sum = rotate(sum_, e1 + e2);
    t.diff = rotate(diff_, e2 - e1);
    t.diff2 = rotate(diff2_, 2.0 * (e2 - e1));
    if (with_gradient_terms) {
        t.diff4 = rotate(diff4_, 4.0 * (e2 - e1));
        t.a1 = rotate(a1_, 2.0 * e1);
        t.a2 = rotate(a2_, 2.0 * e2);
        t.a3 = rotate(a3_, 2.0 * e1 - 4.0 * e2);
        t.a4 = rotate(a4_, 2.0 * e2 - 4.0 * e1);
    }

    // 1 + R^2 - 2R cos(2D) = (1 - R)^2 + 4R sin^2(D)
    t.den = (1.0 - R) * (1.0 - R) + 4.0 * R * t.diff.s * t.diff.s;
    if (!(t.den > 0.0)) throw DomainError("interference denominator vanished");
    const double root = std::sqrt(t.den);

    double F = -2.0 * sqrtR_ * t.sum.c * t.diff.s / root;
    if (std::abs(F) > 1.0) {
        if (std::abs(F) - 1.0 > kFExcessTolerance)
            throw DomainError(fmt::format("|F| exceeds 1 by {}", std::abs(F) - 1.0));
        F = std::copysign(1.0, F);
    }
    t.F = F;
    double st = R * t.diff2.s / root;
    st = std::clamp(st, -1.0, 1.0);
    t.theta = std::asin(st);
    return t;
}

InterferenceKernel Placement::kernel(double q1, double q2) const {
    const Terms t = terms(q1, q2, true);
    const double R = refl_.R;
    InterferenceKernel kern;
    kern.F = t.F;
    kern.theta = t.theta;
    kern.qt1 = Q1_ + q1 * chi1_;
    kern.qt2 = Q2_ + q2 * chi2_;
    auto& f = kern.f;
    f[0] = (2.0 - R + 2.0 * R * R) * t.a1.c;
    f[1] = R * (t.a3.c - 3.0 * t.a2.c - t.a4.c);
    f[2] = t.den * std::sqrt(t.den);
    f[3] = std::sqrt(std::max(0.0, 1.0 - t.F * t.F));
    f[4] = -2.0 * (1.0 + R * R) * t.diff2.c + R * (3.0 + t.diff4.c);
    f[5] = std::abs(R * t.diff2.c - 1.0) / std::sqrt(t.den);
    f[6] = (-2.0 + R - 2.0 * R * R) * t.a2.c;
    f[7] = R * (t.a3.c + 3.0 * t.a1.c - t.a4.c);
    return kern;
}

double Placement::shift(double q1, double q2) const {
    const Terms t = terms(q1, q2, false);
    return c_over_L_ * (parity_ * std::asin(t.F) - t.theta - 2.0 * refl_.phi);
}

namespace {

// asin(x0 + dx) - asin(x0) for |x0|, |x0 + dx| <= 1 without cancellation.
double arcsin_change(double x0, double dx) {
    if (dx == 0.0) return 0.0;
    const double x1 = x0 + dx;
    const double c0 = std::sqrt(std::max(0.0, 1.0 - x0 * x0));
    const double c1 = std::sqrt(std::max(0.0, 1.0 - x1 * x1));
    const double csum = c0 + c1;
    const double dc = csum > 0.0 ? -dx * (2.0 * x0 + dx) / csum : c1 - c0;
    return std::atan2(dx * c0 - x0 * dc, c1 * c0 + x1 * x0);
}

}  // namespace

double Placement::shift_change(double q1, double q2) const {
    const double R = refl_.R;
    if (R == 0.0) return 0.0;
    const double e1 = k_ * chi1_ * q1;
    const double e2 = k_ * chi2_ * q2;
    const SinCos dsum = rotation_delta(sum_, e1 + e2);
    const SinCos ddiff = rotation_delta(diff_, e2 - e1);
    const SinCos ddiff2 = rotation_delta(diff2_, 2.0 * (e2 - e1));

    const double den0 = (1.0 - R) * (1.0 - R) + 4.0 * R * diff_.s * diff_.s;
    const double dden = 4.0 * R * ddiff.s * (2.0 * diff_.s + ddiff.s);
    const double den1 = den0 + dden;
    if (!(den1 > 0.0)) throw DomainError("interference denominator vanished");
    const double r0 = std::sqrt(den0);
    const double r1 = std::sqrt(den1);
    const double dinv = -dden / (r0 * r1 * (r0 + r1));  // 1/r1 - 1/r0

    // F = -2 sqrt(R) cos(S) sin(D) / r
    const double n0 = sum_.c * diff_.s;
    const double dn = dsum.c * (diff_.s + ddiff.s) + sum_.c * ddiff.s;
    const double F0 = -2.0 * sqrtR_ * n0 / r0;
    const double dF = -2.0 * sqrtR_ * (dn / r1 + n0 * dinv);
    if (std::abs(F0 + dF) - 1.0 > kFExcessTolerance)
        throw DomainError(fmt::format("|F| exceeds 1 by {}", std::abs(F0 + dF) - 1.0));

    // sin(theta) = R sin(2D) / r
    const double x0 = R * diff2_.s / r0;
    const double dx = R * (ddiff2.s / r1 + diff2_.s * dinv);

    // Clamp only when rounding pushed the sum past +-1; recomputing F0 + dF - F0
    // unconditionally would throw away the low bits of small changes.
    auto clamped = [](double base, double delta) {
        const double sum = base + delta;
        return std::abs(sum) > 1.0 ? std::copysign(1.0, sum) - base : delta;
    };
    const double dF_clamped = clamped(F0, dF);
    const double dx_clamped = clamped(x0, dx);
    return c_over_L_ * (parity_ * arcsin_change(F0, dF_clamped) - arcsin_change(x0, dx_clamped));
}

ShiftGradient Placement::gradient(double q1, double q2) const { return evaluate(q1, q2).gradient; }

ShiftAndGradient Placement::evaluate(double q1, double q2) const {
    const InterferenceKernel kern = kernel(q1, q2);
    const auto& f = kern.f;
    const double R = refl_.R;
    ShiftAndGradient out;
    out.shift = c_over_L_ * (parity_ * std::asin(kern.F) - kern.theta - 2.0 * refl_.phi);
    if (R == 0.0) return out;
    if (f[3] < kArcsinSingularity || f[5] < kArcsinSingularity)
        throw DomainError("coupling gradient singular (|F| -> 1)");
    const double arcsin_part = -parity_ * k_ * sqrtR_ / (f[2] * f[3]);
    const double theta_part = k_ * R * f[4] / (f[2] * f[5]);
    out.gradient.L1 = c_over_L_ * chi1_ * (arcsin_part * (f[0] + f[1]) + theta_part);
    out.gradient.L2 = c_over_L_ * chi2_ * (arcsin_part * (f[6] + f[7]) - theta_part);
    return out;
}

// ---------------------------------------------------------------------------

InterferenceKernel interference_kernel(const PhysicalParams& params, double Q1, double Q2, double q1, double q2) {
    return Placement(params, Q1, Q2).kernel(q1, q2);
}

double cavity_shift(const PhysicalParams& params, double Q1, double Q2, double q1, double q2) {
    return Placement(params, Q1, Q2).shift(q1, q2);
}

ShiftGradient coupling_gradient(const PhysicalParams& params, double Q1, double Q2, double q1, double q2) {
    return Placement(params, Q1, Q2).gradient(q1, q2);
}

CouplingSet coupling_coefficients(const PhysicalParams& params, double Q1, double Q2,
                                  const SecondDerivativeOptions& options) {
    if (!(options.step > 0.0)) throw DomainError("second-derivative step must be positive");
    const Placement placement(params, Q1, Q2);
    const auto origin = placement.evaluate(0.0, 0.0);

    // Central differences of -L_j give second partials of delta_omega.
    struct Partials {
        double d11, d22, d12, d21;
    };
    auto partials = [&](double h) {
        const auto p1 = placement.gradient(h, 0.0);
        const auto m1 = placement.gradient(-h, 0.0);
        const auto p2 = placement.gradient(0.0, h);
        const auto m2 = placement.gradient(0.0, -h);
        const double inv = 1.0 / (2.0 * h);
        return Partials{-(p1.L1 - m1.L1) * inv, -(p2.L2 - m2.L2) * inv, -(p2.L1 - m2.L1) * inv,
                        -(p1.L2 - m1.L2) * inv};
    };
    Partials d = partials(options.step);
    if (options.richardson) {
        const Partials half = partials(0.5 * options.step);
        auto extrapolate = [](double coarse, double fine) { return (4.0 * fine - coarse) / 3.0; };
        d = {extrapolate(d.d11, half.d11), extrapolate(d.d22, half.d22), extrapolate(d.d12, half.d12),
             extrapolate(d.d21, half.d21)};
    }

    CouplingSet out;
    out.delta_omega0 = origin.shift;
    out.g1 = origin.gradient.L1;
    out.g2 = origin.gradient.L2;
    out.g12 = d.d11;
    out.g22 = d.d22;
    out.gt_12 = d.d12;
    out.gt_21 = d.d21;
    out.gt = 0.5 * (d.d12 + d.d21);
    const double scale = std::max(std::abs(d.d12), std::abs(d.d21));
    out.mixed_symmetric = scale == 0.0 || std::abs(d.d12 - d.d21) <= kMixedAsymmetry * scale;
    out.Delta_prime = params.Delta - out.delta_omega0;
    return out;
}

PhysicalParams with_shifted_detuning(PhysicalParams params, double Q1, double Q2, double Delta_prime) {
    params.Delta = Delta_prime + cavity_shift(params, Q1, Q2, 0.0, 0.0);
    return params;
}

}  // namespace twomem
